from opencqed.parser.config import (
    CONFIG_TYPES,
    BudgetConfig,
    FitConfig,
    MagnetConfig,
    OptimizeConfig,
    ReadoutConfig,
    SpectrumConfig,
    config_to_dict,
    load_config,
    parse_config,
)
from opencqed.parser.csv_parser import read_linewidths, read_spectrum, read_table, read_trace

__all__ = [
    "CONFIG_TYPES",
    "BudgetConfig",
    "FitConfig",
    "MagnetConfig",
    "OptimizeConfig",
    "ReadoutConfig",
    "SpectrumConfig",
    "config_to_dict",
    "load_config",
    "parse_config",
    "read_linewidths",
    "read_spectrum",
    "read_table",
    "read_trace",
]

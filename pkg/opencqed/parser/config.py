"""Run configuration documents of the command-line verbs.

Every verb reads one JSON document, decoded field by field into a frozen dataclass. Keys name physical quantities with
an explicit unit suffix (``_hz``, ``_s``, ``_m``, ``_t``, ``_k``). Unknown keys, values of the wrong type and JSON
syntax errors raise ``ConfigError`` with the dotted path of the field or the line of the document.
"""

from __future__ import annotations

import json
import logging
from dataclasses import MISSING, asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any, Literal, Optional, TypeVar, Union, get_args, get_origin, get_type_hints

from opencqed.common import GHZ, MM, MS, THZ, US
from opencqed.core_model import CoupledSystem, RateSet
from opencqed.design_opt.general_optimizer import DEFAULT_FEASIBLE_WINDOW
from opencqed.design_opt.objectives import DEFAULT_Q_FAB_CAP
from opencqed.exceptions import ConfigError
from opencqed.magnetics.alignment import (
    EXTERNAL_STANDOFF,
    PLACEMENT_TOLERANCE,
    SAMPLE_POINT,
    SAMPLE_STANDOFF,
    TARGET_FIELD,
)
from opencqed.magnetics.cylinder import NDFEB_REMANENCE, SMCO_REMANENCE
from opencqed.readout.statistics import TELEGRAPH_DWELL_PER_T1
from opencqed.spectra import DEFAULT_BASELINE_COUNTS, DEFAULT_EXPOSURE_S

logger = logging.getLogger(__name__)

ConfigT = TypeVar("ConfigT")

GeometryName = Literal["thru", "drop"]


@dataclass(frozen=True)
class SystemSection:
    """Rates of the coupled system; the defaults are those of the best-characterized emitter-cavity pair."""

    f_cav_hz: float = 406.77 * THZ
    detuning_hz: float = 0.523 * GHZ
    kappa_i_hz: float = 24.1 * GHZ
    kappa_c_hz: float = 45.4 * GHZ
    gamma_hz: float = 0.110 * GHZ
    gamma_d_hz: float = 0.0
    g_hz: float = 2.13 * GHZ
    delta_e_hz: float = 50 * GHZ
    temperature_k: float = 4.0

    def coupled_system(self) -> CoupledSystem:
        rates = RateSet.from_detuning(
            self.f_cav_hz,
            self.detuning_hz,
            kappa_i=self.kappa_i_hz,
            kappa_c=self.kappa_c_hz,
            gamma=self.gamma_hz,
            gamma_d=self.gamma_d_hz,
            g=self.g_hz,
            delta_e=self.delta_e_hz,
        )
        return CoupledSystem(rates, self.temperature_k)


@dataclass(frozen=True)
class ScanSection:
    """Drive-cavity detunings of the scan."""

    start_hz: float = -5 * GHZ
    stop_hz: float = 5 * GHZ
    points: int = 401

    def __post_init__(self) -> None:
        if self.points < 2 or not self.stop_hz > self.start_hz:
            msg = "a scan needs at least 2 points and stop_hz above start_hz"
            raise ValueError(msg)


@dataclass(frozen=True)
class CountsSection:
    photon_rate_hz: float = 1e6
    exposure_s: float = DEFAULT_EXPOSURE_S
    grating_efficiency: float = 1.0
    sample: bool = True


@dataclass(frozen=True)
class SpectrumConfig:
    seed: int = 0
    geometry: GeometryName = "drop"
    thermal: bool = False
    system: SystemSection = field(default_factory=SystemSection)
    scan: ScanSection = field(default_factory=ScanSection)
    counts: Optional[CountsSection] = None


@dataclass(frozen=True)
class BroadbandSection:
    input: str
    amplitude: float
    f0_hz: float
    kappa_hz: float
    b0: float = 0.0
    b1_per_hz: float = 0.0
    b2_per_hz2: float = 0.0
    baseline_counts: float = DEFAULT_BASELINE_COUNTS


@dataclass(frozen=True)
class DitSection:
    """DIT scans fitted one by one with the broadband cavity held fixed, then pooled.

    ``fp`` is the initial Fabry-Perot envelope in counts; without it a flat envelope matching the counts of each scan
    is used.
    """

    inputs: tuple[str, ...]
    geometry: GeometryName = "drop"
    thermal: bool = False
    system: SystemSection = field(default_factory=SystemSection)
    fp: Optional[tuple[float, ...]] = None

    def __post_init__(self) -> None:
        if not self.inputs:
            msg = "at least one DIT scan is needed"
            raise ValueError(msg)
        if self.fp is not None and len(self.fp) != 3:
            msg = "fp holds the three Fabry-Perot envelope coefficients"
            raise ValueError(msg)


@dataclass(frozen=True)
class LineshapeSection:
    input: str
    kappa_fixed_hz: Optional[float] = None
    kappa_init_hz: Optional[float] = None


@dataclass(frozen=True)
class FitConfig:
    seed: int = 0
    broadband: Optional[BroadbandSection] = None
    dit: Optional[DitSection] = None
    lineshape: Optional[LineshapeSection] = None

    def __post_init__(self) -> None:
        if self.dit is not None and self.broadband is None:
            msg = "a DIT fit needs the broadband stage for the cavity frequency, linewidth and background"
            raise ConfigError(msg, field="dit")
        if self.broadband is None and self.lineshape is None:
            msg = "nothing to fit: give a broadband, dit or lineshape section"
            raise ConfigError(msg)


@dataclass(frozen=True)
class SimulationSection:
    """Pump-probe simulation; count means are per simulation bin, which are summed ``rebin`` at a time."""

    t1_s: float = 419 * US
    pump_rate_hz: float = 0.0
    pump_duration_s: float = 0.0
    probe_duration_s: float = 50 * MS
    bin_width_s: float = 20 * US
    mu_down: float = 21.9 / 4
    mu_up: float = 41.3 / 4
    sequences: int = 20
    rebin: int = 4

    def __post_init__(self) -> None:
        if self.sequences < 1 or self.rebin < 1:
            msg = "sequences and rebin must be positive"
            raise ValueError(msg)


@dataclass(frozen=True)
class ReadoutConfig:
    """Readout analysis of simulated sequences, or of recorded traces when ``inputs`` is given."""

    seed: int = 0
    simulation: SimulationSection = field(default_factory=SimulationSection)
    inputs: tuple[str, ...] = ()
    threshold: Optional[int] = None
    histogram: bool = False
    drop_first_bin: bool = True
    correct_misclassification: bool = True
    coarse_grained: bool = True
    dwell_per_t1: float = TELEGRAPH_DWELL_PER_T1


@dataclass(frozen=True)
class ParameterSection:
    name: str
    lower: float
    upper: float


@dataclass(frozen=True)
class OptimizeConfig:
    """Design search; ``objective`` selects the synthetic landscape, the toy cavity or an external command."""

    seed: int = 0
    objective: Literal["landscape", "toy", "command"] = "landscape"
    dim: int = 6
    command: tuple[str, ...] = ()
    parameters: tuple[ParameterSection, ...] = ()
    timeout_s: float = 600.0
    feasible_window_m: tuple[float, ...] = DEFAULT_FEASIBLE_WINDOW
    q_fab_cap: Optional[float] = DEFAULT_Q_FAB_CAP
    global_budget: int = 250
    local_budget: int = 250
    n_clusters: int = 5
    schedule: Literal["global-then-local", "alternate"] = "global-then-local"
    layout: bool = False

    def __post_init__(self) -> None:
        if self.objective == "command" and not (self.command and self.parameters):
            msg = "a command objective needs the command and its parameters"
            raise ConfigError(msg, field="command")
        if len(self.feasible_window_m) != 2:
            msg = "the feasible window holds a lower and an upper wavelength"
            raise ConfigError(msg, field="feasible_window_m")


@dataclass(frozen=True)
class ExternalSection:
    standoff_m: float = EXTERNAL_STANDOFF
    remanence_t: float = NDFEB_REMANENCE
    axis: tuple[float, ...] = (-1.0, 0.0, 0.0)
    half_width_m: float = 60 * MM
    step_m: float = 1 * MM
    tolerance_m: float = PLACEMENT_TOLERANCE

    def __post_init__(self) -> None:
        if len(self.axis) != 3:
            msg = "the magnet axis has three components"
            raise ValueError(msg)
        if not (self.step_m > 0 and self.half_width_m >= 0):
            msg = "step_m must be positive and half_width_m non-negative"
            raise ValueError(msg)


@dataclass(frozen=True)
class MagnetConfig:
    seed: int = 0
    mount_remanence_t: float = SMCO_REMANENCE
    standoff_m: float = SAMPLE_STANDOFF
    target_field_t: Optional[float] = TARGET_FIELD
    sample_point_m: tuple[float, ...] = SAMPLE_POINT
    crystal_rotation_deg: float = 0.0
    external: Optional[ExternalSection] = field(default_factory=ExternalSection)

    def __post_init__(self) -> None:
        if len(self.sample_point_m) != 3:
            msg = "the sample point has three coordinates"
            raise ConfigError(msg, field="sample_point_m")


@dataclass(frozen=True)
class BudgetConfig:
    seed: int = 0
    q_sim: float = 4250.0
    t_sim: float = 0.90
    q_exp: float = 3540.0
    f0_hz: float = 406.77 * THZ
    fold_fabrication: bool = False


CONFIG_TYPES: dict[str, type[Any]] = {
    "spectrum": SpectrumConfig,
    "fit": FitConfig,
    "readout": ReadoutConfig,
    "optimize": OptimizeConfig,
    "magnet": MagnetConfig,
    "budget": BudgetConfig,
}


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _type_name(value: Any) -> str:
    return "null" if value is None else type(value).__name__


def _decode_value(tp: Any, value: Any, path: str) -> Any:
    origin = get_origin(tp)
    if is_dataclass(tp):
        return _decode_section(tp, value, path)
    if origin is Union:
        if value is None:
            return None
        (inner,) = (arg for arg in get_args(tp) if arg is not type(None))
        return _decode_value(inner, value, path)
    if origin is Literal:
        if value not in get_args(tp):
            choices = ", ".join(repr(a) for a in get_args(tp))
            msg = f"expected one of {choices}, got {value!r}"
            raise ConfigError(msg, field=path)
        return value
    if origin is tuple:
        if not isinstance(value, list):
            msg = f"expected a list, got {_type_name(value)}"
            raise ConfigError(msg, field=path)
        (item_type, _) = get_args(tp)
        return tuple(_decode_value(item_type, item, f"{path}[{i}]") for i, item in enumerate(value))
    if tp is bool:
        if not isinstance(value, bool):
            msg = f"expected true or false, got {_type_name(value)}"
            raise ConfigError(msg, field=path)
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            msg = f"expected an integer, got {_type_name(value)}"
            raise ConfigError(msg, field=path)
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            msg = f"expected a number, got {_type_name(value)}"
            raise ConfigError(msg, field=path)
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            msg = f"expected a string, got {_type_name(value)}"
            raise ConfigError(msg, field=path)
        return value
    msg = f"unsupported configuration type {tp!r}"
    raise TypeError(msg)


def _decode_section(config_type: type[ConfigT], data: Any, path: str) -> ConfigT:
    if not isinstance(data, dict):
        msg = f"expected an object, got {_type_name(data)}"
        raise ConfigError(msg, field=path or None)
    hints = get_type_hints(config_type)
    known = {f.name: f for f in fields(config_type)}  # type: ignore[arg-type]
    for key in data:
        if key not in known:
            msg = f"unknown key (expected one of {', '.join(sorted(known))})"
            raise ConfigError(msg, field=_join(path, key))

    kwargs = {}
    for name, spec in known.items():
        if name in data:
            kwargs[name] = _decode_value(hints[name], data[name], _join(path, name))
        elif spec.default is MISSING and spec.default_factory is MISSING:
            msg = "missing required field"
            raise ConfigError(msg, field=_join(path, name))
    try:
        return config_type(**kwargs)
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(str(e), field=path or None) from e


def parse_config(text: str, config_type: type[ConfigT]) -> ConfigT:
    """Decodes a JSON configuration document.

    Args:
        text: the JSON document.
        config_type: the configuration dataclass of the verb.

    Raises:
        ConfigError: the document is not valid JSON, has unknown keys, misses required ones or holds a value of the
            wrong type.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        msg = f"invalid JSON at column {e.colno}: {e.msg}"
        raise ConfigError(msg, line=e.lineno) from e
    return _decode_section(config_type, data, "")


def load_config(path: Path, config_type: type[ConfigT]) -> ConfigT:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        msg = f"cannot read configuration {path}: {e.strerror}"
        raise ConfigError(msg) from e
    config = parse_config(text, config_type)
    logger.info("loaded %s from %s", config_type.__name__, path)
    return config


def config_to_dict(config: Any) -> dict[str, Any]:
    return asdict(config)

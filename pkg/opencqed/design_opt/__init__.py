from opencqed.design_opt.general_optimizer import (
    Evaluation,
    EvaluationLog,
    ObjectiveSpec,
    Optimizer,
    ParamBox,
    SearchResult,
)
from opencqed.design_opt.geometry import (
    ChirpSpec,
    DeviceSpec,
    GratingArc,
    GratingSpec,
    PatternCopy,
    PatternDevice,
    chirp_half_lattice,
    chirp_lattice,
    coupling_sweep,
    device_pattern,
    dose_size_array,
    grating_arcs,
    hole_positions,
)
from opencqed.design_opt.lipo import LipoOptimizer, lipo_maximize
from opencqed.design_opt.objectives import (
    Landscape,
    SubprocessObjective,
    ToyCavitySurrogate,
    multi_bump_landscape,
    objective_eta,
)
from opencqed.design_opt.search import Cluster, RankedDesign, cluster_evaluations, interleaved_search
from opencqed.design_opt.trust_region import TrustRegionOptimizer, trust_region_refine

__all__ = [
    "ChirpSpec",
    "Cluster",
    "DeviceSpec",
    "Evaluation",
    "EvaluationLog",
    "GratingArc",
    "GratingSpec",
    "Landscape",
    "LipoOptimizer",
    "ObjectiveSpec",
    "Optimizer",
    "ParamBox",
    "PatternCopy",
    "PatternDevice",
    "RankedDesign",
    "SearchResult",
    "SubprocessObjective",
    "ToyCavitySurrogate",
    "TrustRegionOptimizer",
    "chirp_half_lattice",
    "chirp_lattice",
    "cluster_evaluations",
    "coupling_sweep",
    "device_pattern",
    "dose_size_array",
    "grating_arcs",
    "hole_positions",
    "interleaved_search",
    "lipo_maximize",
    "multi_bump_landscape",
    "objective_eta",
    "trust_region_refine",
]

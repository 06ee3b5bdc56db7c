from opencqed.readout.statistics import (
    BimodalFit,
    FidelityResult,
    classify,
    classify_and_intervals,
    estimate_t1_from_intervals,
    fidelity_at_threshold,
    fit_bimodal,
    optimal_threshold,
    poisson_cdf_derivative,
)
from opencqed.readout.telegraph import (
    SpinState,
    TelegraphConfig,
    TelegraphTrace,
    rebin,
    simulate_sequence,
    simulate_telegraph,
)

__all__ = [
    "BimodalFit",
    "FidelityResult",
    "SpinState",
    "TelegraphConfig",
    "TelegraphTrace",
    "classify",
    "classify_and_intervals",
    "estimate_t1_from_intervals",
    "fidelity_at_threshold",
    "fit_bimodal",
    "optimal_threshold",
    "poisson_cdf_derivative",
    "rebin",
    "simulate_sequence",
    "simulate_telegraph",
]

from opencqed.fitting.decay_fitters import DEGENERATE, fit_exponential_recovery, subtract_transient
from opencqed.fitting.general_fitter import (
    Estimate,
    FitModel,
    FitResult,
    PooledEstimate,
    estimates_from_fits,
    fit_weighted,
    pool,
    shot_noise_sigma,
)
from opencqed.fitting.spectrum_fitters import UNIDENTIFIABLE, fit_broadband, fit_dit, fit_lineshape_vs_detuning

__all__ = [
    "DEGENERATE",
    "UNIDENTIFIABLE",
    "Estimate",
    "FitModel",
    "FitResult",
    "PooledEstimate",
    "estimates_from_fits",
    "fit_broadband",
    "fit_dit",
    "fit_exponential_recovery",
    "fit_lineshape_vs_detuning",
    "fit_weighted",
    "pool",
    "shot_noise_sigma",
    "subtract_transient",
]

"""Single-shot readout analysis: bimodal Poisson fits, thresholds, fidelity, state labels and jump-interval T1."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import optimize, stats

from opencqed.exceptions import DomainError, InsufficientDataError, NoConvergenceError
from opencqed.fitting.general_fitter import FitResult
from opencqed.readout.telegraph import TelegraphTrace

logger = logging.getLogger(__name__)

# A mixture must improve the log-likelihood over a single Poisson distribution by this much (as 2 delta LL).
MIXTURE_LIKELIHOOD_GAIN = 25.0
MEAN_SEPARATION_SIGMAS = 3.0
THRESHOLD_SCAN_SIGMAS = 10.0
MIN_INTERVALS = 20
MIN_INTERVAL_BINS = 2
# Mean dwell per T1 when the spin flips at 1 / (2 T1) in each direction, as in a thermalized telegraph trace.
TELEGRAPH_DWELL_PER_T1 = 2.0
_WEIGHT_EPS = 1e-9


@dataclass(frozen=True)
class BimodalFit:
    """Two-component Poisson mixture a Poisson(mu_down) + b Poisson(mu_up), with a + b the number of shots."""

    mu_down: float
    mu_up: float
    sigma_down: float = 0.0
    sigma_up: float = 0.0
    weight_down: float = 0.5
    weight_up: float = 0.5
    sigma_fraction: float = 0.0
    degenerate: bool = False

    def __post_init__(self) -> None:
        if self.mu_down > self.mu_up:
            msg = "mu_down must not exceed mu_up"
            raise ValueError(msg)
        if self.weight_down < 0 or self.weight_up < 0:
            msg = "mixture weights must be non-negative"
            raise ValueError(msg)

    @property
    def fraction_down(self) -> float:
        return self.weight_down / (self.weight_down + self.weight_up)

    def to_dict(self) -> dict[str, float | bool]:
        return {
            "mu_down": self.mu_down,
            "mu_up": self.mu_up,
            "sigma_down": self.sigma_down,
            "sigma_up": self.sigma_up,
            "weight_down": self.weight_down,
            "weight_up": self.weight_up,
            "sigma_fraction": self.sigma_fraction,
            "degenerate": self.degenerate,
        }


@dataclass(frozen=True)
class FidelityResult:
    threshold: int
    fidelity: float
    sigma: float
    p_down_given_up: float
    p_up_given_down: float

    def to_dict(self) -> dict[str, float]:
        return {
            "threshold": self.threshold,
            "fidelity": self.fidelity,
            "sigma": self.sigma,
            "p_down_given_up": self.p_down_given_up,
            "p_up_given_down": self.p_up_given_down,
        }


def _log_components(
    values: NDArray[np.float64], mu_down: float, mu_up: float, w: float
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    return (
        math.log(w) + stats.poisson.logpmf(values, mu_down),
        math.log1p(-w) + stats.poisson.logpmf(values, mu_up),
    )


def fit_bimodal(counts: ArrayLike, *, histogram: bool = False) -> BimodalFit:
    """Maximum-likelihood fit of a two-component Poisson mixture.

    Args:
        counts: counts of every shot, or with ``histogram=True`` the number of shots with 0, 1, 2, ... counts.
        histogram: interpret ``counts`` as a histogram.

    Returns:
        The mixture, relabelled so that mu_down < mu_up, with sigmas from the observed score outer product.
    """
    data = np.asarray(counts)
    if histogram:
        values = np.flatnonzero(data).astype(np.float64)
        multiplicity = data[data > 0].astype(np.float64)
    else:
        unique, occurrences = np.unique(data.astype(np.int64), return_counts=True)
        values, multiplicity = unique.astype(np.float64), occurrences.astype(np.float64)
    if np.any(values < 0):
        msg = "counts must be non-negative"
        raise ValueError(msg)
    if values.size < 2:
        msg = "a bimodal fit needs at least two distinct count values"
        raise InsufficientDataError(msg)
    n_shots = float(multiplicity.sum())

    def negative_log_likelihood(p: NDArray[np.float64]) -> float:
        low, high = _log_components(values, p[0], p[1], p[2])
        return -float(np.sum(multiplicity * np.logaddexp(low, high)))

    shots = np.repeat(values, multiplicity.astype(np.int64))
    half = shots.size // 2
    start = [max(float(shots[:half].mean()), 1e-3), max(float(shots[half:].mean()), 1e-3), 0.5]
    solution = optimize.minimize(
        negative_log_likelihood,
        start,
        method="L-BFGS-B",
        bounds=[(1e-9, None), (1e-9, None), (_WEIGHT_EPS, 1 - _WEIGHT_EPS)],
    )
    if not np.all(np.isfinite(solution.x)):
        msg = f"bimodal fit failed: {solution.message}"
        raise NoConvergenceError(msg)
    mu_down, mu_up, w = (float(v) for v in solution.x)
    if mu_down > mu_up:
        mu_down, mu_up, w = mu_up, mu_down, 1 - w

    covariance = _score_covariance(values, multiplicity, mu_down, mu_up, w)
    sigmas = np.sqrt(np.clip(np.diag(covariance), 0, None))
    joint = math.sqrt(max(covariance[0, 0] + covariance[1, 1] - 2 * covariance[0, 1], 0.0))

    single_mean = float(np.sum(values * multiplicity) / n_shots)
    single_ll = float(np.sum(multiplicity * stats.poisson.logpmf(values, single_mean)))
    gain = 2 * (-solution.fun - single_ll)
    degenerate = bool(
        gain < MIXTURE_LIKELIHOOD_GAIN
        or not np.isfinite(joint)
        or not mu_up - mu_down > MEAN_SEPARATION_SIGMAS * joint
    )
    if degenerate:
        logger.info("count histogram is compatible with a single Poisson distribution (2 dLL = %.3g)", gain)
    fit = BimodalFit(
        mu_down=mu_down,
        mu_up=mu_up,
        sigma_down=float(sigmas[0]),
        sigma_up=float(sigmas[1]),
        weight_down=w * n_shots,
        weight_up=(1 - w) * n_shots,
        sigma_fraction=float(sigmas[2]),
        degenerate=degenerate,
    )
    logger.info("bimodal fit: mu_down=%.4g, mu_up=%.4g, fraction_down=%.3g", mu_down, mu_up, w)
    return fit


def _score_covariance(
    values: NDArray[np.float64], multiplicity: NDArray[np.float64], mu_down: float, mu_up: float, w: float
) -> NDArray[np.float64]:
    low, high = _log_components(values, mu_down, mu_up, w)
    total = np.logaddexp(low, high)
    r_down, r_up = np.exp(low - total), np.exp(high - total)
    scores = np.stack(
        [r_down * (values / mu_down - 1), r_up * (values / mu_up - 1), r_down / w - r_up / (1 - w)],
        axis=1,
    )
    information = (scores * multiplicity[:, None]).T @ scores
    try:
        return np.asarray(np.linalg.inv(information), dtype=np.float64)
    except np.linalg.LinAlgError:
        return np.full((3, 3), np.inf)


def poisson_cdf_derivative(threshold: int, mu: float) -> float:
    """d CDF(T, mu) / d mu = -mu^T exp(-mu) / T!."""
    return -float(stats.poisson.pmf(threshold, mu))


def fidelity_at_threshold(
    mu_down: float,
    mu_up: float,
    threshold: int,
    sigma_down: float = 0.0,
    sigma_up: float = 0.0,
) -> FidelityResult:
    """Single-shot fidelity when a bin with more than ``threshold`` counts is read as spin up.

    F = 1 - (p(down|up) + p(up|down)) / 2 with p(down|up) = CDF(T, mu_up) and p(up|down) = 1 - CDF(T, mu_down). The
    uncertainty propagates (sigma_down, sigma_up) through the analytic derivative of the Poisson CDF.
    """
    if mu_down > mu_up:
        msg = "mu_down must not exceed mu_up"
        raise ValueError(msg)
    if threshold < 0:
        msg = "the threshold must be a non-negative count"
        raise ValueError(msg)
    cdf_down = float(stats.poisson.cdf(threshold, mu_down))
    cdf_up = float(stats.poisson.cdf(threshold, mu_up))
    fidelity = 0.5 + 0.5 * (cdf_down - cdf_up)
    sigma = 0.5 * math.hypot(
        poisson_cdf_derivative(threshold, mu_down) * sigma_down, poisson_cdf_derivative(threshold, mu_up) * sigma_up
    )
    return FidelityResult(
        threshold=int(threshold),
        fidelity=fidelity,
        sigma=sigma,
        p_down_given_up=cdf_up,
        p_up_given_down=float(stats.poisson.sf(threshold, mu_down)),
    )


def optimal_threshold(fit: BimodalFit) -> FidelityResult:
    """Integer threshold maximizing the fidelity; ties go to the smaller threshold."""
    upper = math.ceil(fit.mu_up + THRESHOLD_SCAN_SIGMAS * math.sqrt(fit.mu_up))
    thresholds = np.arange(upper + 1)
    fidelities = 0.5 + 0.5 * (stats.poisson.cdf(thresholds, fit.mu_down) - stats.poisson.cdf(thresholds, fit.mu_up))
    best = int(thresholds[int(np.argmax(fidelities))])
    return fidelity_at_threshold(fit.mu_down, fit.mu_up, best, fit.sigma_down, fit.sigma_up)


def classify(trace: TelegraphTrace, threshold: int) -> NDArray[np.int64]:
    """Per-bin spin labels, 1 (up) for bins with more than ``threshold`` counts."""
    return np.asarray(trace.counts > threshold, dtype=np.int64)


def classify_and_intervals(trace: TelegraphTrace, threshold: int) -> NDArray[np.float64]:
    """Dwell times between consecutive label changes of a trace, in s.

    The dwell before the first and after the last change is censored by the trace edges and is not reported.
    """
    changes = np.flatnonzero(np.diff(classify(trace, threshold))) + 1
    return np.asarray(np.diff(changes) * trace.bin_width, dtype=np.float64)


def estimate_t1_from_intervals(
    intervals: ArrayLike,
    bin_width: float,
    drop_first_bin: bool = True,
    *,
    misclassification: float = 0.0,
    dwell_per_t1: float = 1.0,
    coarse_grained: bool = False,
) -> FitResult:
    """Estimates T1 from the exponential distribution of dwell times.

    Dwell times are rounded to whole bins; the bin counts are fitted with a geometric law by maximum likelihood, whose
    decay per bin is the per-bin flip hazard. Intervals shorter than half a bin are discarded.

    Args:
        intervals: dwell times in s.
        bin_width: bin width of the labels in s.
        drop_first_bin: ignore one-bin dwells, which are dominated by false jumps.
        misclassification: per-bin probability of a wrong label, whose false jumps are removed from the hazard.
        dwell_per_t1: ratio between the mean dwell time and T1. The default reads the intervals as exponential with mean
            T1; pass ``TELEGRAPH_DWELL_PER_T1`` for jumps at 1 / (2 T1) in both directions.
        coarse_grained: the labels are bin-resolution snapshots, in which pairs of flips within a bin go unseen.

    Returns:
        Fit with parameter ``t1`` and derived ``dwell_time`` and ``hazard_per_bin``.
    """
    if bin_width <= 0 or dwell_per_t1 <= 0:
        msg = "bin_width and dwell_per_t1 must be positive"
        raise ValueError(msg)
    if not 0 <= misclassification < 1:
        msg = "misclassification must lie in [0, 1)"
        raise ValueError(msg)
    bins = np.rint(np.asarray(intervals, dtype=np.float64) / bin_width).astype(np.int64)
    k_min = 2 if drop_first_bin else 1
    kept = bins[bins >= k_min] - k_min
    if kept.size < MIN_INTERVALS or np.unique(kept).size < MIN_INTERVAL_BINS:
        msg = (
            f"{kept.size} intervals in {np.unique(kept).size} bins after censoring; at least {MIN_INTERVALS} "
            f"intervals in {MIN_INTERVAL_BINS} bins are needed"
        )
        raise InsufficientDataError(msg)

    n = kept.size
    mean_bins = float(kept.mean())
    if mean_bins == 0:
        msg = "every interval falls in the first retained bin"
        raise InsufficientDataError(msg)
    hazard = math.log1p(1 / mean_bins)
    survival = math.exp(-hazard)
    sigma_hazard = (1 - survival) / math.sqrt(n * survival)

    corrected = hazard + math.log1p(-misclassification)
    if corrected <= 0:
        msg = "the misclassification rate explains every observed flip"
        raise DomainError(msg)
    if coarse_grained:
        change = -math.expm1(-corrected)
        if change >= 0.5:
            msg = "flip probability per bin reaches 1/2, the bins are too wide to resolve the dwell time"
            raise DomainError(msg)
        log_term = math.log1p(-2 * change)
        dwell = -2 * bin_width / log_term
        d_dwell = -4 * bin_width / (log_term**2 * (1 - 2 * change)) * math.exp(-corrected)
    else:
        dwell = bin_width / corrected
        d_dwell = -bin_width / corrected**2

    t1 = dwell / dwell_per_t1
    sigma_t1 = abs(d_dwell) * sigma_hazard / dwell_per_t1

    counts = np.bincount(kept)
    expected = n * (1 - survival) * survival ** np.arange(counts.size)
    chi2 = float(np.sum((counts - expected) ** 2 / np.maximum(expected, 1.0)))
    fit = FitResult(
        params={"t1": t1},
        sigmas={"t1": sigma_t1},
        covariance=np.array([[sigma_t1**2]]),
        chi2_reduced=chi2 / max(counts.size - 2, 1),
        converged=True,
        derived={"dwell_time": (dwell, abs(d_dwell) * sigma_hazard), "hazard_per_bin": (corrected, sigma_hazard)},
        n_points=n,
    )
    logger.info("T1 from %d intervals: %.4g s +- %.2g s", n, t1, sigma_t1)
    return fit

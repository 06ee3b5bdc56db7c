"""Single and bi-exponential recovery fits of pump-probe count traces."""

from __future__ import annotations

import logging
import math
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from opencqed.common import as_float_array
from opencqed.exceptions import NoConvergenceError, NumericalError
from opencqed.fitting.general_fitter import FitModel, FitResult, fit_weighted, shot_noise_sigma

logger = logging.getLogger(__name__)

DEGENERATE = "degenerate"
MIN_POINTS = {"single": 4, "bi": 6}
# Two time constants closer than this many joint standard deviations are treated as one.
RATE_SEPARATION_SIGMAS = 3.0

DecayModel = Literal["single", "bi"]


class SingleExponential(FitModel):
    """y = y_inf - A exp(-t / tau)."""

    param_names = ("y_inf", "amplitude", "t1")

    def evaluate(self, x: NDArray[np.float64], p: NDArray[np.float64]) -> NDArray[np.float64]:
        y_inf, amplitude, tau = p
        return np.asarray(y_inf - amplitude * np.exp(-x / tau), dtype=np.float64)

    def jacobian(self, x: NDArray[np.float64], p: NDArray[np.float64]) -> NDArray[np.float64]:
        _, amplitude, tau = p
        decay = np.exp(-x / tau)
        return np.stack([np.ones_like(x), -decay, -amplitude * decay * x / tau**2], axis=1)


class BiExponential(FitModel):
    """y = y_inf - A1 exp(-t / tau1) - A2 exp(-t / tau2)."""

    param_names = ("y_inf", "amplitude_1", "tau_1", "amplitude_2", "tau_2")

    def evaluate(self, x: NDArray[np.float64], p: NDArray[np.float64]) -> NDArray[np.float64]:
        y_inf, a1, tau1, a2, tau2 = p
        return np.asarray(y_inf - a1 * np.exp(-x / tau1) - a2 * np.exp(-x / tau2), dtype=np.float64)

    def jacobian(self, x: NDArray[np.float64], p: NDArray[np.float64]) -> NDArray[np.float64]:
        _, a1, tau1, a2, tau2 = p
        d1, d2 = np.exp(-x / tau1), np.exp(-x / tau2)
        return np.stack(
            [np.ones_like(x), -d1, -a1 * d1 * x / tau1**2, -d2, -a2 * d2 * x / tau2**2],
            axis=1,
        )


def _initial_single(t: NDArray[np.float64], y: NDArray[np.float64]) -> list[float]:
    tail = max(len(y) // 10, 1)
    y_inf = float(np.mean(y[-tail:]))
    amplitude = y_inf - float(y[0])
    if amplitude == 0:
        return [y_inf, 0.0, 1 / 3]
    remaining = (y_inf - y) / amplitude
    below = np.flatnonzero(remaining < math.exp(-1))
    tau = float(t[below[0]]) if below.size and t[below[0]] > 0 else 1 / 3
    return [y_inf, amplitude, tau]


def fit_exponential_recovery(
    t: ArrayLike,
    y: ArrayLike,
    sigma: ArrayLike | None = None,
    model: DecayModel = "single",
) -> FitResult:
    """Fits an exponential recovery towards a steady level.

    Times are rescaled by the trace span internally. A bi-exponential fit whose two time constants coincide within
    their joint uncertainty, or whose amplitudes are not resolved, falls back to the single-exponential fit flagged
    ``degenerate``.

    Args:
        t: sample times in s.
        y: counts or signal.
        sigma: 1-sigma uncertainties, shot noise when omitted.
        model: ``"single"`` or ``"bi"``.

    Returns:
        Fit with ``y_inf``, ``amplitude`` and ``t1`` (single) or ``y_inf``, ``amplitude_1``, ``tau_1``,
        ``amplitude_2``, ``tau_2`` with tau_1 < tau_2 (bi).
    """
    if model not in MIN_POINTS:
        msg = f"unknown decay model {model!r}"
        raise ValueError(msg)
    times, values = as_float_array(t), as_float_array(y)
    errors = shot_noise_sigma(values) if sigma is None else as_float_array(sigma)
    if times.size < MIN_POINTS[model]:
        msg = f"a {model}-exponential fit needs at least {MIN_POINTS[model]} points, got {times.size}"
        raise NoConvergenceError(msg)
    span = float(times.max() - times.min())
    if not span > 0:
        msg = "sample times must not all coincide"
        raise ValueError(msg)
    x = times / span

    start = _initial_single(x, values)
    single = _rescale(fit_weighted(SingleExponential(), x, values, errors, start), SingleExponential.param_names, span)
    if model == "single":
        logger.info("single-exponential fit: T1=%.4g s +- %.2g s", single["t1"], single.sigma("t1"))
        return single

    y_inf, amplitude, tau = start
    try:
        bi = fit_weighted(BiExponential(), x, values, errors, [y_inf, amplitude / 2, tau / 3, amplitude / 2, 2 * tau])
    except NumericalError as exc:
        logger.info("bi-exponential fit collapsed onto a single rate: %s", exc)
        return single.with_flags(DEGENERATE)
    bi = _rescale(bi, BiExponential.param_names, span)
    if bi["tau_1"] > bi["tau_2"]:
        order = [0, 3, 4, 1, 2]
        bi = bi.linear_map(BiExponential.param_names, np.zeros(5), np.eye(5)[order])

    if _is_degenerate(bi):
        logger.info("bi-exponential fit does not resolve two rates, keeping the single-exponential fit")
        return single.with_flags(DEGENERATE)
    logger.info("bi-exponential fit: tau_1=%.4g s, tau_2=%.4g s", bi["tau_1"], bi["tau_2"])
    return bi


def _rescale(fit: FitResult, names: tuple[str, ...], span: float) -> FitResult:
    scale = [span if name.startswith(("t1", "tau")) else 1.0 for name in names]
    return fit.linear_map(names, np.zeros(len(names)), np.diag(scale))


def _is_degenerate(bi: FitResult) -> bool:
    names = list(bi.params)
    i, j = names.index("tau_1"), names.index("tau_2")
    cov = bi.covariance
    joint = math.sqrt(max(cov[i, i] + cov[j, j] - 2 * cov[i, j], 0.0))
    separated = abs(bi["tau_2"] - bi["tau_1"]) > RATE_SEPARATION_SIGMAS * joint
    resolved = all(abs(bi[n]) > bi.sigma(n) for n in ("amplitude_1", "amplitude_2"))
    return not (separated and resolved and bi["tau_1"] > 0)


def subtract_transient(
    t: ArrayLike, y: ArrayLike, sigma: ArrayLike | None = None
) -> tuple[NDArray[np.float64], FitResult]:
    """Removes a slow exponential settling transient from a count trace, keeping its steady level.

    Returns:
        The corrected trace and the fit of the transient.
    """
    times, values = as_float_array(t), as_float_array(y)
    fit = fit_exponential_recovery(times, values, sigma, model="bi")
    if fit.has_flag(DEGENERATE):
        transient = fit["amplitude"] * np.exp(-times / fit["t1"])
    else:
        transient = fit["amplitude_1"] * np.exp(-times / fit["tau_1"]) + fit["amplitude_2"] * np.exp(
            -times / fit["tau_2"]
        )
    return values + transient, fit

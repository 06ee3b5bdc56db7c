"""Weighted nonlinear least squares shared by every fit model, and inverse-variance pooling of repeated fits."""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import optimize

from opencqed.common import as_float_array
from opencqed.exceptions import EmptyPoolError, NoConvergenceError, SingularJacobianError

logger = logging.getLogger(__name__)

MAX_ITERATIONS = 200
XTOL = 1e-10
FTOL = 1e-12
# Largest accepted condition number of the column-normalized weighted Jacobian.
MAX_CONDITION = 1e12
DEFAULT_MAX_CHI2_REDUCED = 3.0


class FitModel(ABC):
    """A model y = f(x; p) with named parameters."""

    param_names: tuple[str, ...] = ()

    @abstractmethod
    def evaluate(self, x: NDArray[np.float64], p: NDArray[np.float64]) -> NDArray[np.float64]:
        raise NotImplementedError

    def jacobian(self, x: NDArray[np.float64], p: NDArray[np.float64]) -> NDArray[np.float64] | None:
        """Analytic Jacobian d f / d p of shape (len(x), len(p)), or None to use finite differences."""
        return None

    @property
    def n_params(self) -> int:
        return len(self.param_names)


@dataclass(frozen=True, eq=False)
class FitResult:
    params: dict[str, float]
    sigmas: dict[str, float]
    covariance: NDArray[np.float64]
    chi2_reduced: float
    converged: bool
    derived: dict[str, tuple[float, float]] = field(default_factory=dict)
    flags: tuple[str, ...] = ()
    n_points: int = 0

    def __getitem__(self, name: str) -> float:
        if name in self.params:
            return self.params[name]
        return self.derived[name][0]

    def sigma(self, name: str) -> float:
        if name in self.sigmas:
            return self.sigmas[name]
        return self.derived[name][1]

    def has_flag(self, flag: str) -> bool:
        return flag in self.flags

    def linear_map(
        self,
        names: Sequence[str],
        offset: ArrayLike,
        matrix: ArrayLike,
    ) -> FitResult:
        """Re-expresses the parameters as q = offset + M p, propagating the covariance."""
        m = np.asarray(matrix, dtype=np.float64)
        p = np.array([self.params[n] for n in self.params], dtype=np.float64)
        q = as_float_array(offset) + m @ p
        covariance = m @ self.covariance @ m.T
        return FitResult(
            params=dict(zip(names, (float(v) for v in q))),
            sigmas=dict(zip(names, (float(s) for s in np.sqrt(np.clip(np.diag(covariance), 0, None))))),
            covariance=covariance,
            chi2_reduced=self.chi2_reduced,
            converged=self.converged,
            derived=dict(self.derived),
            flags=self.flags,
            n_points=self.n_points,
        )

    def with_derived(self, name: str, value: float, gradient: dict[str, float]) -> FitResult:
        """Adds a derived quantity whose uncertainty follows from its gradient with respect to the parameters."""
        names = list(self.params)
        g = np.array([gradient.get(n, 0.0) for n in names], dtype=np.float64)
        sigma = math.sqrt(max(float(g @ self.covariance @ g), 0.0))
        derived = {**self.derived, name: (value, sigma)}
        return FitResult(
            self.params, self.sigmas, self.covariance, self.chi2_reduced, self.converged, derived, self.flags,
            self.n_points,
        )  # fmt: skip

    def with_flags(self, *flags: str) -> FitResult:
        return FitResult(
            self.params, self.sigmas, self.covariance, self.chi2_reduced, self.converged, dict(self.derived),
            tuple(dict.fromkeys((*self.flags, *flags))), self.n_points,
        )  # fmt: skip

    def to_dict(self) -> dict[str, object]:
        return {
            "params": dict(self.params),
            "sigmas": dict(self.sigmas),
            "covariance": self.covariance.tolist(),
            "chi2_reduced": self.chi2_reduced,
            "converged": self.converged,
            "derived": {k: {"value": v, "sigma": s} for k, (v, s) in self.derived.items()},
            "flags": list(self.flags),
            "n_points": self.n_points,
        }


@dataclass(frozen=True)
class Estimate:
    mean: float
    sigma: float
    chi2_reduced: float = 1.0
    converged: bool = True


@dataclass(frozen=True)
class PooledEstimate:
    mean: float
    sigma: float
    n_used: int
    n_rejected: int


EstimateLike = Union[Estimate, tuple[float, float]]


def shot_noise_sigma(counts: ArrayLike) -> NDArray[np.float64]:
    """Poisson uncertainty sqrt(max(counts, 1)) of every data point."""
    return np.sqrt(np.maximum(as_float_array(counts), 1.0))


def fit_weighted(
    model: FitModel,
    x: ArrayLike,
    y: ArrayLike,
    sigma: ArrayLike,
    p0: ArrayLike,
    *,
    max_iterations: int = MAX_ITERATIONS,
) -> FitResult:
    """Minimizes sum(((f(x; p) - y) / sigma)^2) with a Levenberg-Marquardt solver.

    The covariance is the inverse of J^T J of the weighted residuals, not rescaled by the reduced chi-square, so that
    sigmas reflect the supplied data uncertainties.

    Args:
        model: the fit model.
        x: independent variable.
        y: data.
        sigma: 1-sigma data uncertainties.
        p0: initial parameter vector.
        max_iterations: iteration cap.

    Returns:
        The fit result with parameters named after ``model.param_names``.
    """
    xs, ys, ws = as_float_array(x), as_float_array(y), 1 / as_float_array(sigma)
    start = as_float_array(p0)
    n_points, n_params = ys.size, model.n_params
    if start.size != n_params:
        msg = f"expected {n_params} initial parameters, got {start.size}"
        raise ValueError(msg)
    if n_points < n_params:
        msg = f"{n_points} data points cannot determine {n_params} parameters"
        raise NoConvergenceError(msg)

    def residuals(p: NDArray[np.float64]) -> NDArray[np.float64]:
        return (model.evaluate(xs, p) - ys) * ws

    def weighted_jacobian(p: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.asarray(model.jacobian(xs, p), dtype=np.float64) * ws[:, None]

    has_jacobian = model.jacobian(xs, start) is not None
    solution = optimize.least_squares(
        residuals,
        start,
        jac=weighted_jacobian if has_jacobian else "2-point",
        method="lm",
        xtol=XTOL,
        ftol=FTOL,
        max_nfev=max_iterations * (n_params + 1),
    )
    if solution.status < 0 or not np.all(np.isfinite(solution.x)):
        msg = f"least squares failed: {solution.message}"
        raise NoConvergenceError(msg)

    p = solution.x
    jac = weighted_jacobian(p) if has_jacobian else _central_jacobian(residuals, p)
    covariance = _covariance(jac, model.param_names)
    chi2 = float(np.sum(residuals(p) ** 2))
    converged = solution.status > 0
    if not converged:
        logger.warning("fit of %s stopped at the iteration cap: %s", type(model).__name__, solution.message)

    sigmas = np.sqrt(np.clip(np.diag(covariance), 0, None))
    return FitResult(
        params=dict(zip(model.param_names, (float(v) for v in p))),
        sigmas=dict(zip(model.param_names, (float(s) for s in sigmas))),
        covariance=covariance,
        chi2_reduced=chi2 / max(n_points - n_params, 1),
        converged=converged,
        n_points=n_points,
    )


def _central_jacobian(
    fun: Callable[[NDArray[np.float64]], NDArray[np.float64]], p: NDArray[np.float64]
) -> NDArray[np.float64]:
    steps = 6e-6 * np.maximum(np.abs(p), 1e-3)
    columns = []
    for i, h in enumerate(steps):
        dp = np.zeros_like(p)
        dp[i] = h
        columns.append((fun(p + dp) - fun(p - dp)) / (2 * h))
    return np.stack(columns, axis=1)


def _covariance(jac: NDArray[np.float64], names: Sequence[str]) -> NDArray[np.float64]:
    norms = np.linalg.norm(jac, axis=0)
    if np.any(norms == 0) or not np.all(np.isfinite(norms)):
        dead = [n for n, v in zip(names, norms) if not v > 0]
        msg = f"parameters {dead} do not affect the model"
        raise SingularJacobianError(msg)
    normalized = jac / norms
    condition = np.linalg.cond(normalized)
    if not condition < MAX_CONDITION:
        msg = f"the fit Jacobian is singular (condition number {condition:.3g})"
        raise SingularJacobianError(msg)
    inverse = np.linalg.inv(normalized.T @ normalized)
    covariance = inverse / np.outer(norms, norms)
    return np.asarray((covariance + covariance.T) / 2, dtype=np.float64)


def default_rejection(estimate: Estimate) -> bool:
    """Rejects scans with a poor fit (reduced chi-square above 3) or a fit that did not converge."""
    return not estimate.converged or estimate.chi2_reduced > DEFAULT_MAX_CHI2_REDUCED


def estimates_from_fits(fits: Iterable[FitResult], name: str) -> list[Estimate]:
    return [Estimate(fit[name], fit.sigma(name), fit.chi2_reduced, fit.converged) for fit in fits]


def pool(
    estimates: Iterable[EstimateLike],
    reject: Callable[[Estimate], bool] = default_rejection,
) -> PooledEstimate:
    """Most-likely (inverse-variance weighted) combination of repeated estimates.

    Args:
        estimates: the estimates, as ``Estimate`` objects or ``(mean, sigma)`` pairs.
        reject: predicate marking estimates to discard.

    Returns:
        The pooled mean, with sigma = (sum sigma_j^-2)^(-1/2).
    """
    items = [e if isinstance(e, Estimate) else Estimate(float(e[0]), float(e[1])) for e in estimates]
    if any(not e.sigma > 0 for e in items):
        msg = "every estimate needs a positive sigma"
        raise ValueError(msg)
    kept = [e for e in items if not reject(e)]
    if not kept:
        msg = f"all {len(items)} estimates were rejected"
        raise EmptyPoolError(msg)
    weights = [1 / e.sigma**2 for e in kept]
    total = math.fsum(weights)
    mean = math.fsum(w * e.mean for w, e in zip(weights, kept)) / total
    return PooledEstimate(mean=mean, sigma=1 / math.sqrt(total), n_used=len(kept), n_rejected=len(items) - len(kept))

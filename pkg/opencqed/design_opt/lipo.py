"""Adaptive Lipschitz (LIPO) global search.

Candidates are drawn uniformly in the unit cube of the box and only evaluated when the Lipschitz upper bound
min_j [f(x_j) + k |x - x_j|] can reach the incumbent max_j f(x_j). The constant k is the smallest value of the grid
(1 + alpha)^i above the largest slope observed so far, with alpha = 0.01 / dim. Distances are measured in unit-cube
coordinates.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from opencqed.common import substream
from opencqed.design_opt.general_optimizer import (
    EvaluationLog,
    ObjectiveSpec,
    Optimizer,
    ParamBox,
    SearchResult,
    check_budget,
)

logger = logging.getLogger(__name__)

CANDIDATE_BATCH = 1024
GRID_RATIO_SCALE = 0.01


def lipschitz_exponent(slope: float, alpha: float) -> int | None:
    """Exponent i of the smallest grid value (1 + alpha)^i >= slope, or None for a zero slope."""
    if slope <= 0:
        return None
    return math.ceil(math.log(slope) / math.log1p(alpha))


def upper_bounds(
    candidates: NDArray[np.float64], points: NDArray[np.float64], values: NDArray[np.float64], k: float
) -> NDArray[np.float64]:
    """Lipschitz upper bound of every candidate row given the evaluated points (all in unit coordinates)."""
    distances = np.linalg.norm(candidates[:, None, :] - points[None, :, :], axis=2)
    return np.asarray(np.min(values[None, :] + k * distances, axis=1), dtype=np.float64)


def max_slope(points: NDArray[np.float64], values: NDArray[np.float64]) -> float:
    if len(values) < 2:
        return 0.0
    distances = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)
    gaps = np.abs(values[:, None] - values[None, :])
    mask = distances > 0
    return float(np.max(gaps[mask] / distances[mask])) if np.any(mask) else 0.0


def _slope_to(points: NDArray[np.float64], values: NDArray[np.float64], u: NDArray[np.float64], value: float) -> float:
    distances = np.linalg.norm(points - u, axis=1)
    mask = distances > 0
    return float(np.max(np.abs(values[mask] - value) / distances[mask])) if np.any(mask) else 0.0


class LipoOptimizer(Optimizer):
    """LIPO search with an adaptively estimated Lipschitz constant.

    Evaluations already present in the log passed to ``maximize`` are reused as observations, so a search can be
    resumed in several chunks.

    Args:
        seed: seed of the candidate stream.
        initial_points: points evaluated first, in box coordinates; a single random point when omitted.
        target: stop as soon as an evaluation reaches this value.
    """

    phase = "lipo"

    def __init__(
        self, seed: int, initial_points: Sequence[ArrayLike] | None = None, target: float | None = None
    ) -> None:
        self.seed = seed
        self.initial_points = [] if initial_points is None else list(initial_points)
        self.target = target

    def maximize(
        self, objective: ObjectiveSpec, box: ParamBox, budget: int, log: EvaluationLog | None = None
    ) -> SearchResult:
        log = EvaluationLog() if log is None else log
        start = len(log)
        check_budget(budget, 1 if start else box.dim + 1)
        rng = substream(self.seed, start)
        alpha = GRID_RATIO_SCALE / box.dim

        units = [box.to_unit(e.point) for e in log]
        values = [e.value for e in log]
        if not units:
            seeds = [box.to_unit(box.clip(p)) for p in self.initial_points[:budget]] or [rng.random(box.dim)]
            for u, value in zip(seeds, objective.score_many(box.from_unit(u) for u in seeds)):
                log.record(box.from_unit(u), value, self.phase, 0.0)
                units.append(u)
                values.append(value)

        slope = max_slope(np.array(units), np.array(values))
        exponent = lipschitz_exponent(slope, alpha)
        while len(log) - start < budget and not self._reached(values):
            points, observed = np.array(units), np.array(values)
            u, k = self._propose(rng, points, observed, exponent, alpha)
            value = objective.score(box.from_unit(u))
            log.record(box.from_unit(u), value, self.phase, k)
            logger.debug("LIPO evaluation %d: k=%.6g, value=%.6g", len(log) - 1, k, value)
            slope = max(slope, _slope_to(points, observed, u, value))
            units.append(u)
            values.append(value)
            exponent = lipschitz_exponent(slope, alpha)

        own = [log[i] for i in range(start, len(log))]
        best = max(own, key=lambda e: (e.value, -e.index))
        reached = self._reached([e.value for e in own])
        if not reached:
            logger.info("LIPO used its budget of %d evaluations, best value %.6g", budget, best.value)
        return SearchResult(np.array(best.point), best.value, log, budget_exhausted=not reached)

    def _reached(self, values: Sequence[float]) -> bool:
        return self.target is not None and bool(values) and max(values) >= self.target

    @staticmethod
    def _propose(
        rng: np.random.Generator,
        points: NDArray[np.float64],
        values: NDArray[np.float64],
        exponent: int | None,
        alpha: float,
    ) -> tuple[NDArray[np.float64], float]:
        """Rejection-samples a candidate that passes the upper-bound rule.

        Every batch without an accepted candidate raises the Lipschitz exponent by 2^j for the j-th failed batch.
        """
        incumbent = float(values.max())
        boost = 0
        failures = 0
        while True:
            k = 0.0 if exponent is None else (1 + alpha) ** (exponent + boost)
            candidates = rng.random((CANDIDATE_BATCH, points.shape[1]))
            accepted = np.flatnonzero(upper_bounds(candidates, points, values, k) >= incumbent)
            if accepted.size:
                return candidates[accepted[0]], k
            if exponent is None:
                exponent = 0
            boost += 2**failures
            failures += 1
            logger.debug("no LIPO candidate accepted with k=%.6g, raising the exponent by %d", k, boost)


def lipo_maximize(
    objective: ObjectiveSpec,
    box: ParamBox,
    budget: int,
    seed: int,
    *,
    initial_points: Sequence[ArrayLike] | None = None,
    target: float | None = None,
) -> SearchResult:
    return LipoOptimizer(seed, initial_points, target).maximize(objective, box, budget)

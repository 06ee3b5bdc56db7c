"""Derivative-free trust-region refinement with a separable quadratic model.

Every iteration samples the objective at +-h along each of an orthonormal set of directions around the incumbent and
fits one parabola per direction, which gives a model with a linear term and a diagonal curvature in that basis
(2 dim + 1 points). The model is maximized within the trust radius and the box, and the radius grows or shrinks with
the agreement between predicted and actual improvement. After an interior step the step direction replaces the
direction that moved most, in the manner of Powell's conjugate-direction updates.
"""

from __future__ import annotations

import logging
import math

import numpy as np
from numpy.typing import ArrayLike, NDArray

from opencqed.design_opt.general_optimizer import (
    EvaluationLog,
    ObjectiveSpec,
    Optimizer,
    ParamBox,
    SearchResult,
    check_budget,
)

logger = logging.getLogger(__name__)

INITIAL_RADIUS = 0.1
MIN_RADIUS = 1e-9
GOOD_AGREEMENT = 0.75
POOR_AGREEMENT = 0.25


def _step_limits(u: NDArray[np.float64], direction: NDArray[np.float64]) -> tuple[float, float]:
    """Largest steps along +direction and -direction that stay inside the unit cube."""
    with np.errstate(divide="ignore", invalid="ignore"):
        to_upper = np.where(direction > 0, (1 - u) / direction, np.where(direction < 0, -u / direction, np.inf))
        to_lower = np.where(direction > 0, u / direction, np.where(direction < 0, (u - 1) / direction, np.inf))
    return float(np.max([np.min(to_upper), 0.0])), float(np.max([np.min(to_lower), 0.0]))


def _parabola(f0: float, h_plus: float, f_plus: float, h_minus: float, f_minus: float) -> tuple[float, float]:
    """Slope and curvature at 0 of the parabola through (-h_minus, f_minus), (0, f0), (h_plus, f_plus)."""
    if h_plus > 0 and h_minus > 0:
        right = (f_plus - f0) / h_plus
        left = (f0 - f_minus) / h_minus
        curvature = 2 * (right - left) / (h_plus + h_minus)
        return right - curvature * h_plus / 2, curvature
    if h_plus > 0:
        return (f_plus - f0) / h_plus, 0.0
    if h_minus > 0:
        return (f0 - f_minus) / h_minus, 0.0
    return 0.0, 0.0


def _model_step(
    gradient: NDArray[np.float64], curvature: NDArray[np.float64], radius: float
) -> tuple[NDArray[np.float64], bool]:
    """Maximizer of the separable model within the radius; also reports whether the radius was binding."""
    step = np.where(curvature < 0, -gradient / np.where(curvature < 0, curvature, 1.0), np.sign(gradient) * radius)
    length = float(np.linalg.norm(step))
    if length > radius:
        return step * (radius / length), True
    return step, False


class TrustRegionOptimizer(Optimizer):
    """Local maximization from ``start`` with a monotone nondecreasing incumbent.

    A start point already present in the log keeps its logged value instead of being evaluated again.

    Args:
        start: starting point in box coordinates, inside the box.
        initial_radius: initial trust radius in unit-cube coordinates.
        min_radius: the search stops once the radius falls below this value.
    """

    phase = "local"

    def __init__(
        self, start: ArrayLike, initial_radius: float = INITIAL_RADIUS, min_radius: float = MIN_RADIUS
    ) -> None:
        if not 0 < min_radius < initial_radius:
            msg = "radii must satisfy 0 < min_radius < initial_radius"
            raise ValueError(msg)
        self.start = np.asarray(start, dtype=np.float64)
        self.initial_radius = initial_radius
        self.min_radius = min_radius

    def maximize(
        self, objective: ObjectiveSpec, box: ParamBox, budget: int, log: EvaluationLog | None = None
    ) -> SearchResult:
        check_budget(budget)
        if not box.contains(self.start):
            msg = "the starting point lies outside the box"
            raise ValueError(msg)
        log = EvaluationLog() if log is None else log
        used = 0

        def evaluate(u: NDArray[np.float64]) -> float:
            nonlocal used
            value = objective.score(box.from_unit(u))
            log.record(box.from_unit(u), value, self.phase)
            used += 1
            return value

        d = box.dim
        x = box.to_unit(self.start)
        known = log.find(self.start)
        fx = evaluate(x) if known is None else known.value
        directions = np.eye(d)
        radius = self.initial_radius
        max_radius = math.sqrt(d)

        while radius >= self.min_radius and used + 2 * d + 1 <= budget:
            h = radius / 2
            gradient, curvature = np.zeros(d), np.zeros(d)
            best_u, best_f = x, fx
            for i in range(d):
                v = directions[:, i]
                reach_plus, reach_minus = _step_limits(x, v)
                h_plus, h_minus = min(h, reach_plus), min(h, reach_minus)
                f_plus = evaluate(np.clip(x + h_plus * v, 0, 1)) if h_plus > 0 else fx
                f_minus = evaluate(np.clip(x - h_minus * v, 0, 1)) if h_minus > 0 else fx
                gradient[i], curvature[i] = _parabola(fx, h_plus, f_plus, h_minus, f_minus)
                for f_side, u_side in ((f_plus, x + h_plus * v), (f_minus, x - h_minus * v)):
                    if f_side > best_f:
                        best_u, best_f = np.clip(u_side, 0, 1), f_side

            s, on_radius = _model_step(gradient, curvature, radius)
            trial = np.clip(x + directions @ s, 0, 1)
            on_box = not np.allclose(trial, x + directions @ s)
            s_taken = directions.T @ (trial - x)
            predicted = float(gradient @ s_taken + 0.5 * curvature @ s_taken**2)
            f_trial = evaluate(trial)
            actual = f_trial - fx

            if predicted > 0:
                agreement = actual / predicted
            else:
                agreement = -math.inf
            if f_trial > best_f:
                best_u, best_f = trial, f_trial

            if agreement > GOOD_AGREEMENT:
                radius = min(2 * radius, max_radius)
            elif agreement < POOR_AGREEMENT:
                radius /= 2
            logger.debug("trust region: value=%.9g, agreement=%.3g, radius=%.3g", best_f, agreement, radius)

            if best_f > fx:
                step = best_u - x
                if best_u is trial and not on_radius and not on_box and np.linalg.norm(step) > 0:
                    directions = self._replace_direction(directions, step, s_taken)
                x, fx = best_u, best_f

        exhausted = radius >= self.min_radius
        if exhausted:
            logger.info("trust region stopped at its budget of %d evaluations, value %.6g", budget, fx)
        return SearchResult(box.from_unit(x), fx, log, budget_exhausted=exhausted)

    @staticmethod
    def _replace_direction(
        directions: NDArray[np.float64], step: NDArray[np.float64], components: NDArray[np.float64]
    ) -> NDArray[np.float64]:
        dropped = int(np.argmax(np.abs(components)))
        basis = np.column_stack([step / np.linalg.norm(step), np.delete(directions, dropped, axis=1)])
        q, r = np.linalg.qr(basis)
        return np.asarray(q * np.where(np.diag(r) < 0, -1.0, 1.0), dtype=np.float64)


def trust_region_refine(
    objective: ObjectiveSpec,
    start: ArrayLike,
    box: ParamBox,
    budget: int,
    *,
    initial_radius: float = INITIAL_RADIUS,
) -> SearchResult:
    return TrustRegionOptimizer(start, initial_radius).maximize(objective, box, budget)

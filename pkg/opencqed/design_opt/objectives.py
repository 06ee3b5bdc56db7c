"""Design objectives: the cooperativity-proportional score and the backends it can be evaluated with."""

from __future__ import annotations

import json
import logging
import math
import subprocess
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import optimize

from opencqed.common import NM, substream
from opencqed.design_opt.general_optimizer import DEFAULT_FEASIBLE_WINDOW, ObjectiveSpec, ParamBox
from opencqed.exceptions import NumericalError

logger = logging.getLogger(__name__)

DEFAULT_Q_FAB_CAP = 5e4
BUMP_HEIGHTS = (1.0, 0.7, 0.5)
BUMP_CENTER_RANGE = (0.2, 0.8)
BUMP_WIDTH_RANGE = (0.2, 0.3)
SUBPROCESS_TIMEOUT = 600.0


def objective_eta(
    q_sim: float, v_norm: float, field_overlap_abs: float, q_fab_cap: float | None = DEFAULT_Q_FAB_CAP
) -> float:
    """Score proportional to the cooperativity: Q / V times the squared normalized field overlap.

    The simulated quality factor is combined with a fabrication cap, 1/Q = 1/Q_fab + 1/Q_sim. Passing None or
    infinity for ``q_fab_cap`` removes the cap.
    """
    if q_sim <= 0 or v_norm <= 0:
        msg = "q_sim and v_norm must be positive"
        raise ValueError(msg)
    if q_fab_cap is None or math.isinf(q_fab_cap):
        q = q_sim
    elif q_fab_cap > 0:
        q = q_fab_cap * q_sim / (q_fab_cap + q_sim)
    else:
        msg = "q_fab_cap must be positive"
        raise ValueError(msg)
    return q / v_norm * field_overlap_abs**2


@dataclass(frozen=True, eq=False)
class Landscape:
    """Sum of Gaussian bumps on the unit cube, with its global maximum located numerically."""

    centers: NDArray[np.float64]
    heights: NDArray[np.float64]
    widths: NDArray[np.float64]
    peak_point: NDArray[np.float64] = field(init=False)
    peak_value: float = field(init=False)

    def __post_init__(self) -> None:
        dim = self.centers.shape[1]
        runs = [
            optimize.minimize(
                lambda x: -self(x), center, jac=lambda x: -self.gradient(x), method="L-BFGS-B", bounds=[(0, 1)] * dim
            )
            for center in self.centers
        ]
        best = min(runs, key=lambda r: float(r.fun))
        object.__setattr__(self, "peak_point", np.asarray(best.x, dtype=np.float64))
        object.__setattr__(self, "peak_value", float(-best.fun))

    @property
    def dim(self) -> int:
        return int(self.centers.shape[1])

    def __call__(self, x: ArrayLike) -> float:
        return float(np.sum(self._terms(x)))

    def gradient(self, x: ArrayLike) -> NDArray[np.float64]:
        v = np.asarray(x, dtype=np.float64)
        weights = self._terms(v) / self.widths**2
        return np.asarray(-(weights[:, None] * (v - self.centers)).sum(axis=0), dtype=np.float64)

    def _terms(self, x: ArrayLike) -> NDArray[np.float64]:
        distances = np.sum((np.asarray(x, dtype=np.float64) - self.centers) ** 2, axis=1)
        return np.asarray(self.heights * np.exp(-distances / (2 * self.widths**2)), dtype=np.float64)

    def box(self) -> ParamBox:
        return ParamBox([f"x{i}" for i in range(self.dim)], np.zeros(self.dim), np.ones(self.dim))

    def objective(self) -> ObjectiveSpec:
        return ObjectiveSpec(self, concurrency_safe=True)


def multi_bump_landscape(seed: int, dim: int = 6) -> Landscape:
    """Seeded synthetic landscape of three Gaussian bumps of decreasing height."""
    rng = substream(seed, 0)
    n = len(BUMP_HEIGHTS)
    return Landscape(
        rng.uniform(*BUMP_CENTER_RANGE, size=(n, dim)),
        np.array(BUMP_HEIGHTS),
        rng.uniform(*BUMP_WIDTH_RANGE, size=n),
    )


TOY_PARAMETERS = ("w", "h", "w_x", "w_y", "a_cav", "a_mir")


@dataclass(frozen=True, eq=False)
class ToyCavitySurrogate:
    """Analytic stand-in for a cavity simulation over (w, h, w_x, w_y, a_cav, a_mir).

    The resonance wavelength depends linearly on the geometry, the simulated Q falls off as a Gaussian of the scaled
    distance from ``center`` and the mode volume grows away from it, so ``center`` is the exact maximum of the score.
    """

    center: NDArray[np.float64] = field(
        default_factory=lambda: np.array([402.8, 182.8, 66.3, 112.0, 132.5, 140.1]) * NM
    )
    scales: NDArray[np.float64] = field(default_factory=lambda: np.array([40.0, 20.0, 10.0, 15.0, 5.0, 6.0]) * NM)
    wavelength_sensitivity: NDArray[np.float64] = field(
        default_factory=lambda: np.array([0.45, 0.6, -0.35, -0.5, 2.4, 1.1])
    )
    resonance_at_center: float = 737.0 * NM
    q_center: float = 1.75e5
    v_center: float = 1.86
    overlap: float = 0.5
    q_fab_cap: float | None = DEFAULT_Q_FAB_CAP
    box_fraction: float = 0.2

    def _scaled_distance(self, x: ArrayLike) -> float:
        return float(np.sum(((np.asarray(x, dtype=np.float64) - self.center) / self.scales) ** 2))

    def resonance_wavelength(self, x: ArrayLike) -> float:
        return float(self.resonance_at_center + self.wavelength_sensitivity @ (np.asarray(x) - self.center))

    def q_sim(self, x: ArrayLike) -> float:
        return self.q_center * math.exp(-self._scaled_distance(x) / 2)

    def v_norm(self, x: ArrayLike) -> float:
        return self.v_center * (1 + self._scaled_distance(x) / 8)

    def __call__(self, x: ArrayLike) -> float:
        return objective_eta(self.q_sim(x), self.v_norm(x), self.overlap, self.q_fab_cap)

    def box(self) -> ParamBox:
        return ParamBox(
            TOY_PARAMETERS, self.center * (1 - self.box_fraction), self.center * (1 + self.box_fraction), self.center
        )

    def objective(self, feasible_window: tuple[float, float] = DEFAULT_FEASIBLE_WINDOW) -> ObjectiveSpec:
        return ObjectiveSpec(
            self, self.resonance_wavelength, feasible_window=feasible_window, concurrency_safe=True
        )


@dataclass(frozen=True)
class SubprocessObjective:
    """Objective evaluated by an external program.

    For every point the program receives ``{"point": {name: value, ...}}`` as JSON on standard input and must print
    the score as a JSON number on standard output.
    """

    command: tuple[str, ...]
    names: tuple[str, ...]
    timeout: float = SUBPROCESS_TIMEOUT

    @classmethod
    def from_command(
        cls, command: Sequence[str], names: Sequence[str], timeout: float = SUBPROCESS_TIMEOUT
    ) -> SubprocessObjective:
        if not command:
            msg = "the objective command is empty"
            raise ValueError(msg)
        return cls(tuple(command), tuple(names), timeout)

    def __call__(self, x: ArrayLike) -> float:
        request = json.dumps({"point": {name: float(v) for name, v in zip(self.names, np.asarray(x, dtype=float))}})
        try:
            proc = subprocess.run(  # noqa: S603
                self.command, input=request, capture_output=True, text=True, timeout=self.timeout, check=False
            )
        except (OSError, subprocess.TimeoutExpired) as e:
            msg = f"objective command {self.command[0]!r} failed: {e}"
            raise NumericalError(msg) from e
        if proc.returncode != 0:
            msg = f"objective command exited with status {proc.returncode}: {proc.stderr.strip()}"
            raise NumericalError(msg)
        try:
            value = json.loads(proc.stdout)
        except json.JSONDecodeError as e:
            msg = f"objective command printed no JSON number: {proc.stdout[:80]!r}"
            raise NumericalError(msg) from e
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            msg = f"objective command printed {value!r} instead of a number"
            raise NumericalError(msg)
        logger.debug("external objective at %s: %r", request, value)
        return float(value)

    def objective(self) -> ObjectiveSpec:
        return ObjectiveSpec(self)

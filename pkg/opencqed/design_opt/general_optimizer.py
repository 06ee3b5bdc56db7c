"""Bounded parameter boxes, gated objectives, evaluation logs and the optimizer base class."""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from collections.abc import Callable, Iterable, Iterator, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from opencqed.common import as_float_array

logger = logging.getLogger(__name__)

DEFAULT_FEASIBLE_WINDOW = (700e-9, 800e-9)


@dataclass(frozen=True, eq=False)
class ParamBox:
    """Named box constraints lower <= x <= upper, together with a current point inside the box."""

    names: tuple[str, ...]
    lower: NDArray[np.float64]
    upper: NDArray[np.float64]
    point: NDArray[np.float64]

    def __init__(
        self, names: Sequence[str], lower: ArrayLike, upper: ArrayLike, point: ArrayLike | None = None
    ) -> None:
        lo, hi = as_float_array(lower), as_float_array(upper)
        x = (lo + hi) / 2 if point is None else as_float_array(point)
        if not (len(names) == lo.size == hi.size == x.size):
            msg = "names, bounds and point differ in length"
            raise ValueError(msg)
        if len(set(names)) != len(names):
            msg = "parameter names must be unique"
            raise ValueError(msg)
        if not np.all(lo < hi):
            msg = "every lower bound must lie below its upper bound"
            raise ValueError(msg)
        if np.any(x < lo) or np.any(x > hi):
            msg = "the point lies outside the box"
            raise ValueError(msg)
        for array in (lo, hi, x):
            array.setflags(write=False)
        object.__setattr__(self, "names", tuple(names))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "point", x)

    @classmethod
    def from_bounds(cls, bounds: Mapping[str, tuple[float, float]], point: ArrayLike | None = None) -> ParamBox:
        names = list(bounds)
        return cls(names, [bounds[n][0] for n in names], [bounds[n][1] for n in names], point)

    @property
    def dim(self) -> int:
        return len(self.names)

    @property
    def width(self) -> NDArray[np.float64]:
        return self.upper - self.lower

    def to_unit(self, x: ArrayLike) -> NDArray[np.float64]:
        return (np.asarray(x, dtype=np.float64) - self.lower) / self.width

    def from_unit(self, u: ArrayLike) -> NDArray[np.float64]:
        return self.lower + np.asarray(u, dtype=np.float64) * self.width

    def contains(self, x: ArrayLike) -> bool:
        v = np.asarray(x, dtype=np.float64)
        return bool(np.all(v >= self.lower) and np.all(v <= self.upper))

    def clip(self, x: ArrayLike) -> NDArray[np.float64]:
        return np.clip(np.asarray(x, dtype=np.float64), self.lower, self.upper)

    def with_point(self, x: ArrayLike) -> ParamBox:
        return ParamBox(self.names, self.lower, self.upper, x)

    def as_dict(self, x: ArrayLike | None = None) -> dict[str, float]:
        values = self.point if x is None else np.asarray(x, dtype=np.float64)
        return {name: float(v) for name, v in zip(self.names, values)}


@dataclass(frozen=True)
class ObjectiveSpec:
    """A design score to maximize.

    When ``resonance_wavelength`` is given, designs whose resonance falls outside ``feasible_window`` score 0 without
    being evaluated. Objectives that declare themselves ``concurrency_safe`` are evaluated on a thread pool when a
    batch of points is scored at once.
    """

    evaluate: Callable[[NDArray[np.float64]], float]
    resonance_wavelength: Callable[[NDArray[np.float64]], float] | None = None
    feasible_window: tuple[float, float] = DEFAULT_FEASIBLE_WINDOW
    concurrency_safe: bool = False
    max_workers: int | None = None

    def __post_init__(self) -> None:
        low, high = self.feasible_window
        if not low < high:
            msg = "the feasible window must be a non-empty interval"
            raise ValueError(msg)

    def is_feasible(self, x: NDArray[np.float64]) -> bool:
        if self.resonance_wavelength is None:
            return True
        low, high = self.feasible_window
        return bool(low <= self.resonance_wavelength(x) <= high)

    def score(self, x: NDArray[np.float64]) -> float:
        if not self.is_feasible(x):
            return 0.0
        value = float(self.evaluate(x))
        if not math.isfinite(value):
            logger.warning("objective returned %r at %s, scoring it 0", value, x)
            return 0.0
        return value

    def score_many(self, points: Iterable[NDArray[np.float64]]) -> list[float]:
        batch = list(points)
        if self.concurrency_safe and len(batch) > 1:
            with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
                return list(pool.map(self.score, batch))
        return [self.score(x) for x in batch]


@dataclass(frozen=True)
class Evaluation:
    index: int
    point: tuple[float, ...]
    value: float
    phase: str
    lipschitz: float = math.nan


class EvaluationLog:
    """Ordered record of every objective evaluation of a search."""

    def __init__(self) -> None:
        self._entries: list[Evaluation] = []

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[Evaluation]:
        return iter(self._entries)

    def __getitem__(self, index: int) -> Evaluation:
        return self._entries[index]

    def record(self, point: ArrayLike, value: float, phase: str, lipschitz: float = math.nan) -> Evaluation:
        entry = Evaluation(
            len(self._entries), tuple(float(v) for v in np.asarray(point, dtype=np.float64)), value, phase, lipschitz
        )
        self._entries.append(entry)
        return entry

    def find(self, point: ArrayLike) -> Evaluation | None:
        """Latest evaluation at exactly ``point``, if any."""
        key = tuple(float(v) for v in np.asarray(point, dtype=np.float64))
        return next((e for e in reversed(self._entries) if e.point == key), None)

    def best(self) -> Evaluation:
        if not self._entries:
            msg = "the evaluation log is empty"
            raise ValueError(msg)
        return max(self._entries, key=lambda e: (e.value, -e.index))

    def points(self) -> NDArray[np.float64]:
        return np.array([e.point for e in self._entries], dtype=np.float64)

    def values(self) -> NDArray[np.float64]:
        return np.array([e.value for e in self._entries], dtype=np.float64)

    def rows(self) -> list[list[object]]:
        return [[e.index, e.phase, *e.point, e.value] for e in self._entries]


@dataclass(frozen=True, eq=False)
class SearchResult:
    best_point: NDArray[np.float64]
    best_value: float
    log: EvaluationLog
    budget_exhausted: bool


class Optimizer(ABC):
    """Maximizes an objective over a box within a budget of objective evaluations."""

    phase = "search"

    @abstractmethod
    def maximize(
        self, objective: ObjectiveSpec, box: ParamBox, budget: int, log: EvaluationLog | None = None
    ) -> SearchResult:
        """Appends every evaluation to ``log`` (a fresh log when omitted) and returns the best evaluation."""
        raise NotImplementedError


def check_budget(budget: int, minimum: int = 1) -> None:
    if budget < minimum:
        msg = f"the evaluation budget must be at least {minimum}, got {budget}"
        raise ValueError(msg)

"""Continuous-time simulation of spin quantum jumps under a pump-probe sequence, with binned photon counts."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from numpy.typing import NDArray

from opencqed.common import substream

logger = logging.getLogger(__name__)

# Tolerance when deciding how many whole bins fit in the probe window.
BIN_COUNT_RTOL = 1e-9


class SpinState(IntEnum):
    DOWN = 0
    UP = 1

    def flipped(self) -> SpinState:
        return SpinState.UP if self == SpinState.DOWN else SpinState.DOWN


@dataclass(frozen=True)
class TelegraphConfig:
    """Pump-probe sequence of a spin read out through state-dependent photon counts.

    Thermal jumps happen at the same rate 1 / (2 t1) in both directions, so the populations relax with time constant
    ``t1``. During the pump step ``pump_rate`` is added to the down-to-up rate only. ``t1 = inf`` freezes the spin.
    """

    t1: float
    pump_rate: float
    mu_down: float
    mu_up: float
    bin_width: float
    pump_duration: float
    probe_duration: float
    seed: int = 0
    initial_state: SpinState | None = None

    def __post_init__(self) -> None:
        if not self.t1 > 0:
            msg = "t1 must be positive"
            raise ValueError(msg)
        if not (self.bin_width > 0 and self.probe_duration > 0):
            msg = "bin_width and probe_duration must be positive"
            raise ValueError(msg)
        if self.pump_duration < 0 or self.pump_rate < 0:
            msg = "pump_duration and pump_rate must be non-negative"
            raise ValueError(msg)
        if self.mu_down < 0 or self.mu_up < 0:
            msg = "expected counts per bin must be non-negative"
            raise ValueError(msg)
        if self.mu_down == self.mu_up:
            logger.warning("equal count rates in both spin states leave nothing to read out")

    @property
    def thermal_rate(self) -> float:
        return 0.0 if math.isinf(self.t1) else 1 / (2 * self.t1)

    @property
    def n_bins(self) -> int:
        return int(math.floor(self.probe_duration / self.bin_width * (1 + BIN_COUNT_RTOL)))


@dataclass(frozen=True, eq=False)
class TelegraphTrace:
    """Spin trajectory and photon counts of one probe window; times are measured from the start of the probe."""

    initial_state: SpinState
    jump_times: NDArray[np.float64]
    counts: NDArray[np.int64]
    bin_width: float

    def __post_init__(self) -> None:
        if np.any(np.diff(self.jump_times) <= 0):
            msg = "jump times must be strictly increasing"
            raise ValueError(msg)
        if np.any(self.counts < 0):
            msg = "counts must be non-negative"
            raise ValueError(msg)

    @property
    def n_bins(self) -> int:
        return int(self.counts.size)

    @property
    def duration(self) -> float:
        return self.n_bins * self.bin_width

    def bin_starts(self) -> NDArray[np.float64]:
        return np.arange(self.n_bins, dtype=np.float64) * self.bin_width

    def state_at(self, times: NDArray[np.float64]) -> NDArray[np.int64]:
        flips = np.searchsorted(self.jump_times, times, side="right")
        return np.asarray((int(self.initial_state) + flips) % 2, dtype=np.int64)

    def occupancy(self) -> NDArray[np.float64]:
        """Fraction of every bin spent in the up state."""
        edges = np.arange(self.n_bins + 1, dtype=np.float64) * self.bin_width
        breakpoints = np.concatenate(([0.0], self.jump_times[self.jump_times < self.duration], [self.duration]))
        segment_states = (int(self.initial_state) + np.arange(breakpoints.size - 1)) % 2
        up_time = np.concatenate(([0.0], np.cumsum(np.diff(breakpoints) * segment_states)))
        return np.asarray(np.diff(np.interp(edges, breakpoints, up_time)) / self.bin_width, dtype=np.float64)

    def true_states(self) -> NDArray[np.int64]:
        """Majority spin state of every bin."""
        return np.asarray(self.occupancy() > 0.5, dtype=np.int64)


def _evolve(
    state: SpinState,
    duration: float,
    rate_up: float,
    rate_down: float,
    rng: np.random.Generator,
) -> tuple[SpinState, list[float]]:
    """Gillespie evolution of a two-state process over ``duration``; returns the final state and the jump times."""
    t = 0.0
    jumps: list[float] = []
    while True:
        rate = rate_up if state == SpinState.DOWN else rate_down
        if rate <= 0:
            return state, jumps
        t += rng.exponential(1 / rate)
        if t >= duration:
            return state, jumps
        jumps.append(t)
        state = state.flipped()


def simulate_sequence(cfg: TelegraphConfig, index: int) -> TelegraphTrace:
    """Simulates sequence ``index``; the result only depends on ``(cfg.seed, index)``."""
    rng = substream(cfg.seed, index)
    if cfg.initial_state is None:
        state = SpinState(int(rng.integers(2)))
    else:
        state = SpinState(cfg.initial_state)
    rate = cfg.thermal_rate
    if cfg.pump_duration > 0:
        state, _ = _evolve(state, cfg.pump_duration, rate + cfg.pump_rate, rate, rng)

    probe_start = state
    n_bins = cfg.n_bins
    _, jumps = _evolve(state, n_bins * cfg.bin_width, rate, rate, rng)
    jump_times = np.asarray(jumps, dtype=np.float64)
    path = TelegraphTrace(probe_start, jump_times, np.zeros(n_bins, dtype=np.int64), cfg.bin_width)
    mean = cfg.mu_down + (cfg.mu_up - cfg.mu_down) * path.occupancy()
    return TelegraphTrace(probe_start, jump_times, rng.poisson(mean).astype(np.int64), cfg.bin_width)


def simulate_telegraph(cfg: TelegraphConfig, n_sequences: int) -> list[TelegraphTrace]:
    """Simulates ``n_sequences`` independent pump-probe sequences.

    Args:
        cfg: sequence configuration.
        n_sequences: number of sequences.

    Returns:
        One trace per sequence, covering the probe window.
    """
    if n_sequences < 0:
        msg = "n_sequences must be non-negative"
        raise ValueError(msg)
    traces = [simulate_sequence(cfg, index) for index in range(n_sequences)]
    logger.info(
        "simulated %d sequences with %d jumps in total", n_sequences, sum(t.jump_times.size for t in traces)
    )
    return traces


def rebin(trace: TelegraphTrace, factor: int) -> TelegraphTrace:
    """Sums groups of ``factor`` consecutive bins; a trailing partial group is dropped."""
    if factor < 1:
        msg = "the rebinning factor must be a positive integer"
        raise ValueError(msg)
    n_bins = trace.n_bins // factor
    if n_bins * factor != trace.n_bins:
        logger.debug("rebinning drops %d trailing bins", trace.n_bins - n_bins * factor)
    counts = trace.counts[: n_bins * factor].reshape(n_bins, factor).sum(axis=1)
    duration = n_bins * factor * trace.bin_width
    jumps = trace.jump_times[trace.jump_times < duration]
    return TelegraphTrace(trace.initial_state, jumps, counts.astype(np.int64), trace.bin_width * factor)

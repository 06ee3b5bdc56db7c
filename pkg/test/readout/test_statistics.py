from __future__ import annotations

import numpy as np
import pytest

from opencqed.common import MS, US, substream
from opencqed.exceptions import DomainError, InsufficientDataError
from opencqed.readout.statistics import (
    BimodalFit,
    classify,
    classify_and_intervals,
    TELEGRAPH_DWELL_PER_T1,
    estimate_t1_from_intervals,
    fidelity_at_threshold,
    fit_bimodal,
    optimal_threshold,
    poisson_cdf_derivative,
)
from opencqed.readout.telegraph import SpinState, TelegraphConfig, TelegraphTrace, rebin, simulate_telegraph

MU_DOWN, MU_UP = 21.9, 41.3


@pytest.fixture(name="shots")
def shots_fixture() -> np.ndarray:
    rng = substream(21, 0)
    return np.concatenate([rng.poisson(MU_DOWN, 3000), rng.poisson(MU_UP, 2000)])


class TestBimodal:
    def test_recovers_the_mixture(self, shots: np.ndarray) -> None:
        fit = fit_bimodal(shots)
        assert not fit.degenerate
        assert fit.mu_down == pytest.approx(MU_DOWN, abs=5 * fit.sigma_down)
        assert fit.mu_up == pytest.approx(MU_UP, abs=5 * fit.sigma_up)
        assert fit.fraction_down == pytest.approx(0.6, abs=0.03)
        assert fit.weight_down + fit.weight_up == pytest.approx(5000)

    def test_histogram_input(self, shots: np.ndarray) -> None:
        per_shot = fit_bimodal(shots)
        binned = fit_bimodal(np.bincount(shots), histogram=True)
        assert binned.mu_down == pytest.approx(per_shot.mu_down, rel=1e-4)
        assert binned.mu_up == pytest.approx(per_shot.mu_up, rel=1e-4)

    def test_single_poisson_is_degenerate(self) -> None:
        assert fit_bimodal(substream(3, 0).poisson(30.0, 5000)).degenerate

    def test_needs_two_values(self) -> None:
        with pytest.raises(InsufficientDataError):
            fit_bimodal(np.full(100, 7))

    def test_ordered_means(self) -> None:
        with pytest.raises(ValueError, match="must not exceed"):
            BimodalFit(mu_down=5.0, mu_up=1.0)


class TestFidelity:
    def test_reference_threshold(self) -> None:
        result = fidelity_at_threshold(MU_DOWN, MU_UP, 30)
        assert result.fidelity == pytest.approx(0.960, abs=0.003)
        assert result.fidelity == pytest.approx(1 - (result.p_down_given_up + result.p_up_given_down) / 2)
        assert result.sigma == 0.0

    def test_optimal_threshold(self) -> None:
        best = optimal_threshold(BimodalFit(MU_DOWN, MU_UP))
        assert best.threshold == 30
        assert best.fidelity == pytest.approx(0.960, abs=0.003)
        for threshold in range(20, 40):
            assert best.fidelity >= fidelity_at_threshold(MU_DOWN, MU_UP, threshold).fidelity

    def test_uncertainty_propagation(self) -> None:
        result = fidelity_at_threshold(MU_DOWN, MU_UP, 30, sigma_down=0.2, sigma_up=0.3)
        expected = 0.5 * np.hypot(poisson_cdf_derivative(30, MU_DOWN) * 0.2, poisson_cdf_derivative(30, MU_UP) * 0.3)
        assert result.sigma == pytest.approx(expected)
        step = 1e-5
        numeric = (fidelity_at_threshold(MU_DOWN, MU_UP + step, 30).fidelity - result.fidelity) / step
        assert -0.5 * poisson_cdf_derivative(30, MU_UP) == pytest.approx(numeric, rel=1e-3)

    def test_negative_threshold(self) -> None:
        with pytest.raises(ValueError, match="non-negative"):
            fidelity_at_threshold(MU_DOWN, MU_UP, -1)


def test_classify_and_intervals() -> None:
    trace = TelegraphTrace(SpinState.DOWN, np.empty(0), np.array([0, 0, 5, 5, 5, 0, 0, 0, 5], dtype=np.int64), 2.0)
    np.testing.assert_array_equal(classify(trace, 2), [0, 0, 1, 1, 1, 0, 0, 0, 1])
    np.testing.assert_allclose(classify_and_intervals(trace, 2), [6.0, 6.0])


class TestT1FromIntervals:
    bin_width = 80 * US

    def geometric_intervals(self, dwell: float, n: int, seed: int) -> np.ndarray:
        p = 1 - np.exp(-self.bin_width / dwell)
        return (1 + substream(seed, 0).geometric(p, n)) * self.bin_width

    def test_recovers_the_dwell_time(self) -> None:
        intervals = self.geometric_intervals(838 * US, 5000, 1)
        fit = estimate_t1_from_intervals(intervals, self.bin_width, dwell_per_t1=TELEGRAPH_DWELL_PER_T1)
        assert fit["t1"] == pytest.approx(419 * US, rel=0.05)
        assert fit["dwell_time"] == pytest.approx(2 * fit["t1"])
        assert fit["t1"] == pytest.approx(419 * US, abs=5 * fit.sigma("t1"))

    def test_exponential_samples_read_literally(self) -> None:
        intervals = substream(5, 0).exponential(400 * US, 40_000)
        fit = estimate_t1_from_intervals(intervals, 1 * US, drop_first_bin=False)
        assert fit["t1"] == pytest.approx(400 * US, rel=0.02)
        assert fit["dwell_time"] == pytest.approx(fit["t1"])

    def test_misclassification_lengthens_t1(self) -> None:
        intervals = self.geometric_intervals(838 * US, 5000, 1)
        plain = estimate_t1_from_intervals(intervals, self.bin_width)
        corrected = estimate_t1_from_intervals(intervals, self.bin_width, misclassification=0.04)
        assert corrected["t1"] > plain["t1"]

    def test_too_few_intervals(self) -> None:
        with pytest.raises(InsufficientDataError, match="intervals"):
            estimate_t1_from_intervals(self.geometric_intervals(838 * US, 10, 1), self.bin_width)

    def test_misclassification_explains_every_flip(self) -> None:
        with pytest.raises(DomainError, match="misclassification"):
            estimate_t1_from_intervals(self.geometric_intervals(10 * MS, 500, 2), self.bin_width, misclassification=0.9)

    def test_bins_too_wide(self) -> None:
        intervals = np.tile([2, 3], 40) * self.bin_width
        with pytest.raises(DomainError, match="too wide"):
            estimate_t1_from_intervals(intervals, self.bin_width, coarse_grained=True)


def test_t1_from_simulated_jumps() -> None:
    estimates = []
    for seed in range(10):
        cfg = TelegraphConfig(
            t1=419 * US, pump_rate=0.0, mu_down=MU_DOWN / 4, mu_up=MU_UP / 4, bin_width=20 * US, pump_duration=0.0,
            probe_duration=50 * MS, seed=seed,
        )  # fmt: skip
        traces = [rebin(trace, 4) for trace in simulate_telegraph(cfg, 20)]
        fit = fit_bimodal(np.concatenate([trace.counts for trace in traces]))
        readout = optimal_threshold(fit)
        assert readout.fidelity > 0.9
        intervals = np.concatenate([classify_and_intervals(trace, readout.threshold) for trace in traces])
        t1 = estimate_t1_from_intervals(
            intervals,
            traces[0].bin_width,
            misclassification=1 - readout.fidelity,
            dwell_per_t1=TELEGRAPH_DWELL_PER_T1,
            coarse_grained=True,
        )
        estimates.append(t1["t1"])
    np.testing.assert_allclose(estimates, 419 * US, rtol=0.15)

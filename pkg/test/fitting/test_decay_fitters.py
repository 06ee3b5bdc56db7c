from __future__ import annotations

import numpy as np
import pytest

from opencqed.common import US, substream
from opencqed.exceptions import NoConvergenceError
from opencqed.fitting.decay_fitters import DEGENERATE, fit_exponential_recovery, subtract_transient

T1 = 419 * US


def test_single_exponential_noise_free() -> None:
    t = np.linspace(0, 2e-3, 100)
    y = 1000 - 600 * np.exp(-t / T1)
    fit = fit_exponential_recovery(t, y)
    assert fit["t1"] == pytest.approx(T1, rel=1e-6)
    assert fit["y_inf"] == pytest.approx(1000.0, rel=1e-6)


def test_single_exponential_with_shot_noise() -> None:
    t = np.linspace(0, 3e-3, 300)
    y = substream(4, 0).poisson(1000 - 600 * np.exp(-t / T1))
    fit = fit_exponential_recovery(t, y)
    assert fit["t1"] == pytest.approx(T1, abs=5 * fit.sigma("t1"))
    assert fit.chi2_reduced == pytest.approx(1.0, abs=0.4)


def test_bi_exponential_separates_rates() -> None:
    t = np.linspace(0, 5e-3, 400)
    y = 1000 - 300 * np.exp(-t / 50e-6) - 300 * np.exp(-t / 1e-3)
    fit = fit_exponential_recovery(t, y, model="bi")
    assert not fit.has_flag(DEGENERATE)
    assert fit["tau_1"] == pytest.approx(50e-6, rel=1e-3)
    assert fit["tau_2"] == pytest.approx(1e-3, rel=1e-3)


def test_bi_exponential_on_a_single_rate() -> None:
    t = np.linspace(0, 2e-3, 100)
    fit = fit_exponential_recovery(t, 1000 - 600 * np.exp(-t / T1), model="bi")
    assert fit.has_flag(DEGENERATE)
    assert fit["t1"] == pytest.approx(T1, rel=1e-6)


def test_subtract_transient() -> None:
    t = np.linspace(0, 2e-3, 100)
    corrected, _ = subtract_transient(t, 500 - 200 * np.exp(-t / T1))
    np.testing.assert_allclose(corrected, 500.0, rtol=1e-5)


@pytest.mark.parametrize(
    ("model", "n_points", "error"),
    [("single", 3, NoConvergenceError), ("bi", 5, NoConvergenceError), ("triple", 10, ValueError)],
    ids=["single-too-short", "bi-too-short", "unknown-model"],
)
def test_invalid_requests(model: str, n_points: int, error: type[Exception]) -> None:
    t = np.linspace(0, 1e-3, n_points)
    with pytest.raises(error):
        fit_exponential_recovery(t, np.ones(n_points), model=model)  # type: ignore[arg-type]

from __future__ import annotations

import numpy as np
import pytest
from numpy.typing import NDArray

from opencqed.common import substream
from opencqed.exceptions import EmptyPoolError, NoConvergenceError, SingularJacobianError
from opencqed.fitting.general_fitter import (
    Estimate,
    FitModel,
    FitResult,
    estimates_from_fits,
    fit_weighted,
    pool,
    shot_noise_sigma,
)


class Line(FitModel):
    param_names = ("slope", "intercept")

    def evaluate(self, x: NDArray[np.float64], p: NDArray[np.float64]) -> NDArray[np.float64]:
        return p[0] * x + p[1]


class AnalyticLine(Line):
    def jacobian(self, x: NDArray[np.float64], p: NDArray[np.float64]) -> NDArray[np.float64] | None:
        return np.stack([x, np.ones_like(x)], axis=1)


class Redundant(FitModel):
    param_names = ("a", "b")

    def evaluate(self, x: NDArray[np.float64], p: NDArray[np.float64]) -> NDArray[np.float64]:
        return (p[0] + p[1]) * x


class Idle(FitModel):
    param_names = ("a", "unused")

    def evaluate(self, x: NDArray[np.float64], p: NDArray[np.float64]) -> NDArray[np.float64]:
        return p[0] * x


@pytest.fixture(name="line_data")
def line_data_fixture() -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    x = np.linspace(0, 10, 200)
    sigma = np.full_like(x, 0.1)
    y = 2.5 * x - 1.0 + substream(11, 0).normal(0, 0.1, x.size)
    return x, y, sigma


class TestFitWeighted:
    @pytest.mark.parametrize("model", [Line(), AnalyticLine()], ids=["finite-difference", "analytic"])
    def test_recovers_a_line(
        self, model: FitModel, line_data: tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]
    ) -> None:
        fit = fit_weighted(model, *line_data, p0=[1.0, 0.0])
        assert fit.converged
        assert fit["slope"] == pytest.approx(2.5, abs=5 * fit.sigma("slope"))
        assert fit["intercept"] == pytest.approx(-1.0, abs=5 * fit.sigma("intercept"))
        assert fit.chi2_reduced == pytest.approx(1.0, abs=0.3)
        assert fit.n_points == 200

    def test_sigmas_match_linear_regression(
        self, line_data: tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]
    ) -> None:
        x, y, sigma = line_data
        fit = fit_weighted(AnalyticLine(), x, y, sigma, p0=[0.0, 0.0])
        design = np.stack([x, np.ones_like(x)], axis=1) / sigma[:, None]
        np.testing.assert_allclose(fit.covariance, np.linalg.inv(design.T @ design), rtol=1e-8)

    def test_too_few_points(self) -> None:
        with pytest.raises(NoConvergenceError, match="cannot determine"):
            fit_weighted(Line(), [1.0], [1.0], [1.0], p0=[0.0, 0.0])

    def test_wrong_start_length(self) -> None:
        with pytest.raises(ValueError, match="initial parameters"):
            fit_weighted(Line(), [1.0, 2.0], [1.0, 2.0], [1.0, 1.0], p0=[0.0])

    def test_redundant_parameters(self) -> None:
        x = np.linspace(1, 2, 20)
        with pytest.raises(SingularJacobianError, match="singular"):
            fit_weighted(Redundant(), x, 3 * x, np.ones_like(x), p0=[1.0, 1.0])

    def test_unused_parameter(self) -> None:
        x = np.linspace(1, 2, 20)
        with pytest.raises(SingularJacobianError, match="unused"):
            fit_weighted(Idle(), x, 3 * x, np.ones_like(x), p0=[1.0, 1.0])


class TestFitResult:
    @pytest.fixture(name="result")
    def result_fixture(self) -> FitResult:
        return FitResult(
            params={"a": 2.0, "b": 3.0},
            sigmas={"a": 0.1, "b": 0.2},
            covariance=np.diag([0.01, 0.04]),
            chi2_reduced=1.0,
            converged=True,
        )

    def test_linear_map(self, result: FitResult) -> None:
        mapped = result.linear_map(("sum", "diff"), [1.0, 0.0], [[1.0, 1.0], [1.0, -1.0]])
        assert mapped["sum"] == pytest.approx(6.0)
        assert mapped["diff"] == pytest.approx(-1.0)
        assert mapped.sigma("sum") == pytest.approx(np.sqrt(0.05))

    def test_derived_quantity(self, result: FitResult) -> None:
        derived = result.with_derived("ratio", 2.0 / 3.0, {"a": 1 / 3.0, "b": -2.0 / 9.0})
        assert derived["ratio"] == pytest.approx(2.0 / 3.0)
        assert derived.sigma("ratio") == pytest.approx(np.sqrt(0.01 / 9 + 0.04 * 4 / 81))

    def test_flags_are_unique(self, result: FitResult) -> None:
        flagged = result.with_flags("X").with_flags("X", "Y")
        assert flagged.flags == ("X", "Y")
        assert flagged.has_flag("Y")
        assert flagged.to_dict()["flags"] == ["X", "Y"]


class TestPool:
    def test_inverse_variance_mean(self) -> None:
        pooled = pool([(1.0, 1.0), (2.0, 1.0), (4.0, 2.0)])
        assert pooled.mean == pytest.approx((1 + 2 + 4 / 4) / 2.25)
        assert pooled.sigma == pytest.approx(1 / np.sqrt(2.25))
        assert (pooled.n_used, pooled.n_rejected) == (3, 0)

    def test_rejects_bad_fits(self) -> None:
        pooled = pool([Estimate(1.0, 0.1), Estimate(5.0, 0.1, chi2_reduced=10.0), Estimate(7.0, 0.1, converged=False)])
        assert pooled.mean == pytest.approx(1.0)
        assert pooled.n_rejected == 2

    def test_everything_rejected(self) -> None:
        with pytest.raises(EmptyPoolError):
            pool([Estimate(1.0, 0.1, converged=False)])

    def test_non_positive_sigma(self) -> None:
        with pytest.raises(ValueError, match="positive sigma"):
            pool([(1.0, 0.0)])

    def test_estimates_from_fits(self) -> None:
        fit = FitResult({"g": 2.0}, {"g": 0.5}, np.eye(1) * 0.25, chi2_reduced=1.2, converged=True)
        assert estimates_from_fits([fit], "g") == [Estimate(2.0, 0.5, 1.2, True)]


def test_shot_noise_sigma() -> None:
    np.testing.assert_allclose(shot_noise_sigma([0, 1, 4, 100]), [1.0, 1.0, 2.0, 10.0])

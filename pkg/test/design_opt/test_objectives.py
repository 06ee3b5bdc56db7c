from __future__ import annotations

import math
import sys

import numpy as np
import pytest

from opencqed.common import NM
from opencqed.design_opt.objectives import (
    DEFAULT_Q_FAB_CAP,
    SubprocessObjective,
    ToyCavitySurrogate,
    multi_bump_landscape,
    objective_eta,
)
from opencqed.exceptions import NumericalError


class TestObjectiveEta:
    @pytest.mark.parametrize(
        ("q_sim", "cap", "expected"),
        [(1.75e5, DEFAULT_Q_FAB_CAP, 5227.0), (1.75e5, None, 23521.0), (1.75e5, math.inf, 23521.0)],
        ids=["capped", "uncapped", "infinite-cap"],
    )
    def test_reference_design(self, q_sim: float, cap: float | None, expected: float) -> None:
        assert objective_eta(q_sim, 1.86, 0.5, cap) == pytest.approx(expected, rel=1e-3)

    def test_cap_lowers_the_score(self) -> None:
        assert objective_eta(1e4, 1.0, 1.0, 1e4) == pytest.approx(5e3)

    @pytest.mark.parametrize(
        ("q_sim", "v_norm", "cap"), [(0.0, 1.0, None), (1.0, 0.0, None), (1.0, 1.0, -1.0)], ids=["q", "v", "cap"]
    )
    def test_invalid_arguments(self, q_sim: float, v_norm: float, cap: float | None) -> None:
        with pytest.raises(ValueError, match="positive"):
            objective_eta(q_sim, v_norm, 1.0, cap)


class TestToyCavity:
    def test_maximum_at_the_centre(self) -> None:
        toy = ToyCavitySurrogate()
        box = toy.box()
        assert toy(toy.center) == pytest.approx(5227.0, rel=1e-3)
        assert toy(box.clip(toy.center * 1.01)) < toy(toy.center)
        assert toy.resonance_wavelength(toy.center) == pytest.approx(737 * NM)

    def test_resonance_gate(self) -> None:
        toy = ToyCavitySurrogate()
        objective = toy.objective()
        shifted = toy.center.copy()
        shifted[4] += 30 * NM
        assert toy.resonance_wavelength(shifted) > 800 * NM
        assert objective.score(shifted) == 0.0
        assert objective.score(toy.center) > 0.0

    def test_uncapped(self) -> None:
        assert ToyCavitySurrogate(q_fab_cap=None)(ToyCavitySurrogate().center) == pytest.approx(23521.0, rel=1e-3)


class TestLandscape:
    def test_is_seeded(self) -> None:
        first, second = multi_bump_landscape(3), multi_bump_landscape(3)
        np.testing.assert_array_equal(first.centers, second.centers)
        assert not np.array_equal(first.centers, multi_bump_landscape(4).centers)

    def test_peak(self) -> None:
        landscape = multi_bump_landscape(0)
        assert landscape.peak_value >= 1.0
        assert landscape(landscape.peak_point) == pytest.approx(landscape.peak_value)
        assert landscape.box().contains(landscape.peak_point)
        for center in landscape.centers:
            assert landscape(center) <= landscape.peak_value + 1e-9

    def test_gradient(self) -> None:
        landscape = multi_bump_landscape(2, dim=3)
        x = np.array([0.4, 0.5, 0.6])
        step = 1e-6
        numeric = [(landscape(x + step * e) - landscape(x - step * e)) / (2 * step) for e in np.eye(3)]
        np.testing.assert_allclose(landscape.gradient(x), numeric, rtol=1e-5, atol=1e-9)


class TestSubprocessObjective:
    @staticmethod
    def command(script: str) -> list[str]:
        return [sys.executable, "-c", script]

    def test_evaluates_the_program(self) -> None:
        script = "import json, sys; p = json.load(sys.stdin)['point']; print(p['a'] + 2 * p['b'])"
        objective = SubprocessObjective.from_command(self.command(script), ["a", "b"], timeout=60)
        assert objective(np.array([1.0, 3.0])) == pytest.approx(7.0)
        assert objective.objective().score(np.array([1.0, 3.0])) == pytest.approx(7.0)

    @pytest.mark.parametrize(
        "script",
        ["import sys; sys.exit(3)", "print('not json')", "print('[1, 2]')"],
        ids=["exit-status", "no-json", "not-a-number"],
    )
    def test_failures(self, script: str) -> None:
        objective = SubprocessObjective.from_command(self.command(script), ["a"], timeout=60)
        with pytest.raises(NumericalError):
            objective(np.array([0.0]))

    def test_missing_program(self) -> None:
        objective = SubprocessObjective.from_command(["/nonexistent/objective"], ["a"])
        with pytest.raises(NumericalError, match="failed"):
            objective(np.array([0.0]))

    def test_empty_command(self) -> None:
        with pytest.raises(ValueError, match="empty"):
            SubprocessObjective.from_command([], ["a"])

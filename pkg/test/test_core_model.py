from __future__ import annotations

import math

import numpy as np
import pytest

from opencqed.common import GHZ, NM, THZ
from opencqed.core_model import (
    PURCELL_PREFACTOR,
    CavityMode,
    CoupledSystem,
    EmitterParams,
    RateSet,
    bright_population,
    cooperativity,
    cooperativity_from_purcell,
    effective_mode_area,
    expected_coupled_emitters,
    expected_coupled_emitters_curve,
    local_cooperativity,
    overlap_at_depth,
    purcell_factor,
)
from opencqed.exceptions import ConfigError, DomainError
from opencqed.scattering import DriveGrid, Geometry, dark_spectra, mix_intensities, s_drop


@pytest.fixture(name="rates")
def rates_fixture() -> RateSet:
    return RateSet.from_detuning(
        406.77 * THZ,
        0.523 * GHZ,
        kappa_i=24.1 * GHZ,
        kappa_c=45.4 * GHZ,
        gamma=0.110 * GHZ,
        g=2.13 * GHZ,
        delta_e=50 * GHZ,
    )


@pytest.fixture(name="mode")
def mode_fixture() -> CavityMode:
    return CavityMode(f0=406.77 * THZ, q_total=5000, v_norm=1.86, overlap=0.5, decay_len_z=50 * NM)


class TestRateSet:
    def test_derived_quantities(self, rates: RateSet) -> None:
        assert rates.kappa_total == pytest.approx(114.9 * GHZ)
        assert rates.detuning == pytest.approx(0.523 * GHZ)
        assert rates.gamma_total == rates.gamma

    def test_negative_rate(self) -> None:
        with pytest.raises(ValueError, match="kappa_i"):
            RateSet(f_cav=1.0, f_emitter=1.0, kappa_i=-1.0, kappa_c=1.0, gamma=1.0)

    def test_scaled_keeps_cooperativity(self, rates: RateSet) -> None:
        assert cooperativity(rates.scaled(1e-9)) == pytest.approx(cooperativity(rates), rel=1e-12)
        with pytest.raises(ValueError, match="positive"):
            rates.scaled(0.0)


class TestCooperativity:
    def test_reference_emitter(self, rates: RateSet) -> None:
        assert cooperativity(rates) == pytest.approx(1.436, abs=1e-3)
        assert CoupledSystem(rates).cooperativity() == cooperativity(rates)

    @pytest.mark.parametrize("name", ["gamma", "kappa"], ids=["no-emitter-linewidth", "no-cavity-linewidth"])
    def test_zero_linewidth(self, rates: RateSet, name: str) -> None:
        changes = {"gamma": 0.0} if name == "gamma" else {"kappa_i": 0.0, "kappa_c": 0.0}
        system = CoupledSystem(rates).with_rates(**changes)
        with pytest.raises(DomainError, match="linewidth"):
            cooperativity(system.rates)


class TestPurcellChain:
    @pytest.mark.parametrize(
        ("eta", "purcell", "coop"),
        [(5200.0, 323.7, 22.66), (23500.0, 1462.9, 102.4)],
        ids=["capped", "uncapped"],
    )
    def test_purcell_and_cooperativity(self, eta: float, purcell: float, coop: float) -> None:
        f = purcell_factor(eta, 1.0, 1.0)
        assert f == pytest.approx(purcell, rel=1e-3)
        assert cooperativity_from_purcell(f, 0.1, 0.7) == pytest.approx(coop, rel=1e-3)

    def test_prefactor(self) -> None:
        assert purcell_factor(4 * math.pi**2 / 3, 1.0, 1.0, dipole_tilt_deg=0.0) == pytest.approx(1.0)
        assert pytest.approx(0.0759909, rel=1e-6) == PURCELL_PREFACTOR

    def test_invalid_inputs(self) -> None:
        with pytest.raises(ValueError, match="positive"):
            purcell_factor(0.0, 1.0, 1.0)
        with pytest.raises(ValueError, match="debye_waller"):
            cooperativity_from_purcell(10.0, 0.1, 1.5)

    def test_local_cooperativity(self) -> None:
        c = local_cooperativity(5200.0, 1.0, [1.0, 0.5], 0.07, dipole_tilt_deg=0.0)
        np.testing.assert_allclose(c, 0.07 * PURCELL_PREFACTOR * 5200 * np.array([1.0, 0.5]))

    @pytest.mark.parametrize("tilt", [0.0, 35.0, 60.0], ids=["aligned", "default-tilt", "steep"])
    def test_local_cooperativity_follows_purcell_factor(self, tilt: float) -> None:
        c = local_cooperativity(3200.0, 2.0, [0.17, 0.05], 0.07, dipole_tilt_deg=tilt)
        expected = [0.07 * purcell_factor(3200.0, 2.0, overlap, dipole_tilt_deg=tilt) for overlap in (0.17, 0.05)]
        np.testing.assert_allclose(c, expected, rtol=1e-12)

    def test_purcell_linear_in_overlap_and_q_over_v(self) -> None:
        base = purcell_factor(3200.0, 2.0, 0.17)
        assert purcell_factor(3200.0, 2.0, 0.34) == pytest.approx(2 * base, rel=1e-12)
        assert purcell_factor(6400.0, 2.0, 0.17) == pytest.approx(2 * base, rel=1e-12)
        assert purcell_factor(3200.0, 1.0, 0.17) == pytest.approx(2 * base, rel=1e-12)


class TestBrightPopulation:
    def test_reference_splitting(self) -> None:
        assert bright_population(50 * GHZ, 4.0) == pytest.approx(0.646, abs=5e-3)

    def test_limits(self) -> None:
        assert bright_population(0.0, 4.0) == pytest.approx(0.5)
        assert bright_population(50 * GHZ, 1e6) == pytest.approx(0.5, abs=1e-5)
        assert bright_population(50 * GHZ, 0.01) == pytest.approx(1.0)

    @pytest.mark.parametrize("delta_e", [1 * GHZ, 50 * GHZ, 400 * GHZ], ids=["small", "reference", "large"])
    @pytest.mark.parametrize("temperature", [0.3, 4.0, 20.0], ids=["cold", "helium", "warm"])
    def test_logistic_symmetry(self, delta_e: float, temperature: float) -> None:
        total = bright_population(delta_e, temperature) + bright_population(-delta_e, temperature)
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_invalid_temperature(self) -> None:
        with pytest.raises(ValueError, match="temperature"):
            bright_population(50 * GHZ, 0.0)


class TestModeGeometry:
    def test_overlap_pinned_at_reference_depth(self) -> None:
        values = overlap_at_depth([20 * NM, 70 * NM], 50 * NM, 0.4)
        np.testing.assert_allclose(values, [0.4, 0.4 / math.e])

    def test_effective_mode_area(self, mode: CavityMode) -> None:
        lam = mode.wavelength
        expected = 1.86 * (lam / 3.21) ** 3 / (182.8 * NM + 2 * 50 * NM)
        assert effective_mode_area(mode) == pytest.approx(expected)
        assert lam == pytest.approx(737 * NM, rel=1e-3)

    def test_invalid_mode(self) -> None:
        with pytest.raises(ValueError, match="overlap"):
            CavityMode(f0=1.0, q_total=1.0, v_norm=1.0, overlap=1.5, decay_len_z=1.0)


class TestExpectedCoupledEmitters:
    @pytest.fixture(name="shallow_mode")
    def shallow_mode_fixture(self) -> CavityMode:
        return CavityMode(f0=406.77 * THZ, q_total=3200, v_norm=2.0, overlap=0.17, decay_len_z=40 * NM)

    def test_zero_threshold_counts_envelope(self, shallow_mode: CavityMode) -> None:
        emitter = EmitterParams()
        area = effective_mode_area(shallow_mode)
        total = expected_coupled_emitters(3200, 0.0, emitter, shallow_mode, area, samples=20_000)
        assert total == pytest.approx(emitter.areal_density * area, rel=1e-12)
        assert total == pytest.approx(4.61, abs=0.01)

    def test_shallow_emitter_count_near_one(self, shallow_mode: CavityMode) -> None:
        area = effective_mode_area(shallow_mode)
        count = expected_coupled_emitters(3200, 1.0, EmitterParams(), shallow_mode, area)
        assert 0.5 <= count <= 2.0

    def test_monotone_over_q_and_threshold(self, shallow_mode: CavityMode) -> None:
        area = effective_mode_area(shallow_mode)
        q_values = [1e3, 3.2e3, 1e4, 3.2e4, 1e5]
        grid = np.array(
            [
                expected_coupled_emitters_curve(q_values, threshold, EmitterParams(), shallow_mode, area, seed=7)
                for threshold in (0.1, 1.0, 10.0)
            ]
        )
        assert np.all(np.diff(grid, axis=1) >= 0)
        assert np.all(np.diff(grid, axis=0) <= 0)
        assert grid[0, -1] > grid[-1, 0]

    def test_monotone_in_q(self, mode: CavityMode) -> None:
        area = effective_mode_area(mode)
        curve = expected_coupled_emitters_curve([1e3, 1e4, 1e5], 1.0, EmitterParams(), mode, area, samples=20_000)
        assert np.all(np.diff(curve) >= 0)
        assert curve[-1] > 0

    def test_deterministic(self, mode: CavityMode) -> None:
        area = effective_mode_area(mode)
        first = expected_coupled_emitters(1e4, 1.0, EmitterParams(), mode, area, samples=20_000, seed=3)
        assert first == expected_coupled_emitters(1e4, 1.0, EmitterParams(), mode, area, samples=20_000, seed=3)

    def test_unreachable_threshold(self, mode: CavityMode) -> None:
        area = effective_mode_area(mode)
        assert expected_coupled_emitters(1e3, 1e9, EmitterParams(), mode, area, samples=10_000) == 0.0

    def test_no_emitters(self, mode: CavityMode) -> None:
        emitter = EmitterParams(areal_density=0.0)
        assert expected_coupled_emitters(1e4, 1.0, emitter, mode, effective_mode_area(mode)) == 0.0

    def test_too_few_samples(self, mode: CavityMode) -> None:
        with pytest.raises(ConfigError, match="samples"):
            expected_coupled_emitters(1e4, 1.0, EmitterParams(), mode, 1e-12, samples=100)


def test_thermal_transmission_mixes_dark_cavity(rates: RateSet) -> None:
    system = CoupledSystem(rates)
    grid = DriveGrid.linspace(-2 * GHZ, 2 * GHZ, 81)
    expected = mix_intensities(
        s_drop(system, grid).intensity,
        dark_spectra(system, grid, Geometry.DROP).intensity,
        system.bright_population(),
    )
    np.testing.assert_allclose(system.transmission(grid, Geometry.DROP, thermal=True), expected)
    np.testing.assert_allclose(system.transmission(grid, Geometry.DROP), s_drop(system, grid).intensity)

from __future__ import annotations

import numpy as np
import pytest

from opencqed import CoupledSystem, DriveGrid, Geometry, RateSet
from opencqed.common import GHZ, THZ


@pytest.fixture(name="system")
def system_fixture() -> CoupledSystem:
    rates = RateSet.from_detuning(
        406.77 * THZ,
        0.523 * GHZ,
        kappa_i=24.1 * GHZ,
        kappa_c=45.4 * GHZ,
        gamma=0.110 * GHZ,
        g=2.13 * GHZ,
        delta_e=50 * GHZ,
    )
    return CoupledSystem(rates, temperature=4.0)


def test_modelling_a_device(system: CoupledSystem) -> None:
    assert system.cooperativity() == pytest.approx(4 * 2.13**2 / (114.9 * 0.110))


def test_transmission(system: CoupledSystem) -> None:
    grid = DriveGrid.linspace(-5 * GHZ, 5 * GHZ, 401)
    drop = system.transmission(grid, Geometry.DROP)
    averaged = system.transmission(grid, Geometry.DROP, thermal=True)
    assert drop.shape == averaged.shape == (401,)
    assert np.all((drop >= 0) & (drop <= 1))
    assert np.all((averaged >= 0) & (averaged <= 1))
    assert not np.allclose(drop, averaged)

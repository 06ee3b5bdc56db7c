"""Steady-state input-output theory of a two-port cavity coupled to a single emitter.

The emitter is treated in the weak-drive limit (ground-state population one), so every amplitude below is linear in
the input field. All amplitudes are normalized to unit input amplitude at the driven cavity port.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike, NDArray

from opencqed.core_model import CoupledSystem, bright_population
from opencqed.exceptions import DomainError


class Geometry(Enum):
    THRU = "thru"
    DROP = "drop"


class Channel(Enum):
    TRANSMISSION = "transmission"
    FLUORESCENCE = "fluorescence"


@dataclass(frozen=True, eq=False)
class DriveGrid:
    """Drive-cavity detunings delta = f_drive - f_cav, in Hz."""

    detunings: NDArray[np.float64]

    def __init__(self, detunings: ArrayLike) -> None:
        values = np.atleast_1d(np.asarray(detunings, dtype=np.float64))
        if values.ndim != 1 or values.size == 0:
            msg = "a drive grid needs a non-empty one-dimensional list of detunings"
            raise ValueError(msg)
        if not np.all(np.isfinite(values)):
            msg = "drive grid detunings must be finite"
            raise ValueError(msg)
        if np.any(np.diff(values) <= 0):
            msg = "drive grid detunings must be strictly increasing"
            raise ValueError(msg)
        values.setflags(write=False)
        object.__setattr__(self, "detunings", values)

    @classmethod
    def linspace(cls, start: float, stop: float, num: int) -> DriveGrid:
        return cls(np.linspace(start, stop, num))

    def __len__(self) -> int:
        return int(self.detunings.size)


@dataclass(frozen=True, eq=False)
class ComplexSpectrum:
    detunings: NDArray[np.float64]
    amplitudes: NDArray[np.complex128]

    def __post_init__(self) -> None:
        if self.detunings.shape != self.amplitudes.shape:
            msg = "detunings and amplitudes differ in length"
            raise ValueError(msg)

    @property
    def intensity(self) -> NDArray[np.float64]:
        return np.asarray(np.abs(self.amplitudes) ** 2, dtype=np.float64)


def _check_linewidth(sys: CoupledSystem) -> None:
    if sys.rates.kappa_total <= 0:
        msg = "the total cavity linewidth must be positive"
        raise DomainError(msg)


def _factors(
    sys: CoupledSystem, grid: DriveGrid
) -> tuple[NDArray[np.complex128], NDArray[np.complex128], NDArray[np.complex128]]:
    """Cavity factor (i delta - kappa / 2), emitter factor (i (delta - Delta) - gamma_total / 2) and denominator."""
    r = sys.rates
    delta = grid.detunings
    cavity = 1j * delta - r.kappa_total / 2
    emitter = 1j * (delta - r.detuning) - r.gamma_total / 2
    return cavity, emitter, cavity * emitter + r.g**2


def s_thru(sys: CoupledSystem, grid: DriveGrid) -> ComplexSpectrum:
    _check_linewidth(sys)
    r = sys.rates
    _, emitter, denominator = _factors(sys, grid)
    numerator = (1j * grid.detunings - r.kappa_i / 2) * emitter + r.g**2
    return ComplexSpectrum(grid.detunings, numerator / denominator)


def s_drop(sys: CoupledSystem, grid: DriveGrid) -> ComplexSpectrum:
    _check_linewidth(sys)
    _, emitter, denominator = _factors(sys, grid)
    return ComplexSpectrum(grid.detunings, sys.rates.kappa_c * emitter / denominator)


def fluorescence(sys: CoupledSystem, grid: DriveGrid) -> ComplexSpectrum:
    """Free-space scattering amplitude F- of the emitter; |F-|^2 is the PLE intensity per unit input power."""
    _check_linewidth(sys)
    r = sys.rates
    if r.gamma <= 0:
        msg = "fluorescence needs a positive emitter linewidth"
        raise DomainError(msg)
    _, _, denominator = _factors(sys, grid)
    return ComplexSpectrum(grid.detunings, -1j * r.g * np.sqrt(r.kappa_c * r.gamma) / denominator)


def spectrum(sys: CoupledSystem, grid: DriveGrid, geometry: Geometry) -> ComplexSpectrum:
    return s_drop(sys, grid) if geometry == Geometry.DROP else s_thru(sys, grid)


def effective_lineshape(sys: CoupledSystem) -> tuple[float, float]:
    """Cavity-dressed emitter detuning and linewidth.

    Returns:
        (Delta_eff, gamma_eff), with Delta_eff = Delta (1 + g^2 / (Delta^2 + kappa^2 / 4)) and
        gamma_eff = gamma + gamma_d + (4 g^2 / kappa) (kappa^2 / 4) / (Delta^2 + kappa^2 / 4).
    """
    _check_linewidth(sys)
    r = sys.rates
    kappa = r.kappa_total
    lorentz = (kappa**2 / 4) / (r.detuning**2 + kappa**2 / 4)
    delta_eff = r.detuning * (1 + r.g**2 / (r.detuning**2 + kappa**2 / 4))
    gamma_eff = r.gamma_total + (4 * r.g**2 / kappa) * lorentz
    return delta_eff, gamma_eff


def dark_spectra(sys: CoupledSystem, grid: DriveGrid, geometry: Geometry) -> ComplexSpectrum:
    """Bare add-drop cavity response, seen when the emitter sits in its dark orbital branch."""
    _check_linewidth(sys)
    r = sys.rates
    cavity = 1j * grid.detunings - r.kappa_total / 2
    if geometry == Geometry.DROP:
        return ComplexSpectrum(grid.detunings, r.kappa_c / cavity)
    return ComplexSpectrum(grid.detunings, (1j * grid.detunings - r.kappa_i / 2) / cavity)


def mix_intensities(bright: ArrayLike, dark: ArrayLike, p_bright: float) -> NDArray[np.float64]:
    """Classical ensemble average p |S|^2 + (1 - p) |S_dark|^2."""
    if not 0 <= p_bright <= 1:
        msg = "population must lie in [0, 1]"
        raise ValueError(msg)
    return np.asarray(
        p_bright * np.asarray(bright, dtype=np.float64) + (1 - p_bright) * np.asarray(dark, dtype=np.float64),
        dtype=np.float64,
    )


def thermal_average(
    sys: CoupledSystem,
    grid: DriveGrid,
    geometry: Geometry,
    channel: Channel = Channel.TRANSMISSION,
) -> NDArray[np.float64]:
    """Intensity spectrum averaged over the thermal population of the bright orbital branch."""
    p_g = bright_population(sys.rates.delta_e, sys.temperature)
    if channel == Channel.FLUORESCENCE:
        return mix_intensities(fluorescence(sys, grid).intensity, np.zeros(len(grid)), p_g)
    return mix_intensities(spectrum(sys, grid, geometry).intensity, dark_spectra(sys, grid, geometry).intensity, p_g)


def solve_steady_state(sys: CoupledSystem, grid: DriveGrid) -> dict[str, NDArray[np.complex128]]:
    """Solves the Fourier-domain Heisenberg-Langevin equations as a linear system, point by point.

    The unknowns are the cavity field, the emitter coherence and the two output fields, for a unit input at the
    driven port. This is independent of the closed forms above and serves as their numerical oracle.

    Returns:
        Mapping with the ``thru``, ``drop`` and ``fluorescence`` amplitudes and the internal ``cavity`` and
        ``emitter`` amplitudes.
    """
    _check_linewidth(sys)
    r = sys.rates
    delta = grid.detunings
    n = delta.size
    root_kc = np.sqrt(r.kappa_c)

    matrix = np.zeros((n, 4, 4), dtype=np.complex128)
    matrix[:, 0, 0] = 1j * delta - r.kappa_total / 2
    matrix[:, 0, 1] = 1j * r.g
    matrix[:, 1, 0] = 1j * r.g
    matrix[:, 1, 1] = 1j * (delta - r.detuning) - r.gamma_total / 2
    matrix[:, 2, 0] = -root_kc
    matrix[:, 2, 2] = 1.0
    matrix[:, 3, 0] = -root_kc
    matrix[:, 3, 3] = 1.0

    rhs = np.zeros((n, 4, 1), dtype=np.complex128)
    rhs[:, 0, 0] = root_kc
    rhs[:, 2, 0] = 1.0

    solution = np.linalg.solve(matrix, rhs)[..., 0]
    return {
        "cavity": solution[:, 0],
        "emitter": solution[:, 1],
        "thru": solution[:, 2],
        "drop": solution[:, 3],
        "fluorescence": np.sqrt(r.gamma) * solution[:, 1],
    }

"""The coupled cavity-emitter data model and the closed-form figures of merit.

All frequencies and rates are stored as cyclic quantities in Hz, i.e. a field ``kappa_c`` holds kappa_c / 2pi. The
formulas below are homogeneous in 2pi, so they can be evaluated directly on the stored values.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, fields, replace
from typing import TYPE_CHECKING

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import constants, special, stats

from opencqed.common import (
    DEFAULT_DIPOLE_TILT_DEG,
    DEVICE_HEIGHT,
    GAP_REFRACTIVE_INDEX,
    NM,
    UM,
    as_float_array,
    chunk_bounds,
    is_unit_vector,
    substream,
)
from opencqed.exceptions import ConfigError, DomainError

if TYPE_CHECKING:
    from opencqed.scattering import DriveGrid, Geometry

logger = logging.getLogger(__name__)

PURCELL_PREFACTOR = 3 / (4 * math.pi**2)

MIN_MONTE_CARLO_SAMPLES = 10_000
MONTE_CARLO_PARTITION = 1 << 14

OVERLAP_DEPTH_REF = 20 * NM


@dataclass(frozen=True)
class RateSet:
    """Frequencies and rates of the coupled system, all cyclic and in Hz."""

    f_cav: float
    f_emitter: float
    kappa_i: float
    kappa_c: float
    gamma: float
    gamma_d: float = 0.0
    g: float = 0.0
    delta_e: float = 0.0

    def __post_init__(self) -> None:
        if not (self.f_cav > 0 and self.f_emitter > 0):
            msg = "cavity and emitter frequencies must be positive"
            raise ValueError(msg)
        for name in ("kappa_i", "kappa_c", "gamma", "gamma_d", "g", "delta_e"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                msg = f"rate {name} must be finite and non-negative, got {value}"
                raise ValueError(msg)

    @classmethod
    def from_detuning(cls, f_cav: float, detuning: float, **rates: float) -> RateSet:
        """Builds a rate set from the cavity frequency and the emitter-cavity detuning f_emitter - f_cav."""
        return cls(f_cav=f_cav, f_emitter=f_cav + detuning, **rates)

    @property
    def kappa_total(self) -> float:
        return self.kappa_i + 2 * self.kappa_c

    @property
    def detuning(self) -> float:
        return self.f_emitter - self.f_cav

    @property
    def gamma_total(self) -> float:
        return self.gamma + self.gamma_d

    def scaled(self, factor: float) -> RateSet:
        """Rescales every frequency and rate by a common positive factor."""
        if factor <= 0:
            msg = "scale factor must be positive"
            raise ValueError(msg)
        return RateSet(**{f.name: getattr(self, f.name) * factor for f in fields(self)})

    def to_dict(self) -> dict[str, float]:
        return {f.name: float(getattr(self, f.name)) for f in fields(self)}


@dataclass(frozen=True)
class CavityMode:
    f0: float
    q_total: float
    v_norm: float
    overlap: float
    decay_len_z: float

    def __post_init__(self) -> None:
        if self.q_total <= 0 or self.v_norm <= 0 or self.decay_len_z <= 0:
            msg = "q_total, v_norm and decay_len_z must be positive"
            raise ValueError(msg)
        if not 0 <= self.overlap <= 1:
            msg = "overlap must lie in [0, 1]"
            raise ValueError(msg)

    @property
    def kappa(self) -> float:
        return self.f0 / self.q_total

    @property
    def wavelength(self) -> float:
        return float(constants.c / self.f0)


@dataclass(frozen=True)
class EmitterParams:
    radiative_efficiency: float = 0.07
    quantum_efficiency: float = 0.1
    debye_waller: float = 0.7
    dipole_axis: tuple[float, float, float] = (math.sqrt(2 / 3), 0.0, math.sqrt(1 / 3))
    depth_mean: float = 20 * NM
    depth_sigma: float = 6.5 * NM
    areal_density: float = 50 / UM**2

    def __post_init__(self) -> None:
        for name in ("radiative_efficiency", "quantum_efficiency", "debye_waller"):
            if not 0 <= getattr(self, name) <= 1:
                msg = f"{name} must lie in [0, 1]"
                raise ValueError(msg)
        if not is_unit_vector(self.dipole_axis):
            msg = "dipole_axis must have unit norm"
            raise ValueError(msg)
        if self.depth_sigma <= 0:
            msg = "depth_sigma must be positive"
            raise ValueError(msg)
        if self.areal_density < 0:
            msg = "areal_density must be non-negative"
            raise ValueError(msg)


@dataclass(frozen=True)
class CoupledSystem:
    """A cavity mode coupled to a single emitter at a given temperature."""

    rates: RateSet
    temperature: float = 4.0

    def __post_init__(self) -> None:
        if self.temperature <= 0:
            msg = "temperature must be positive"
            raise ValueError(msg)

    def with_rates(self, **changes: float) -> CoupledSystem:
        return replace(self, rates=replace(self.rates, **changes))

    def cooperativity(self) -> float:
        return cooperativity(self.rates)

    def bright_population(self) -> float:
        return bright_population(self.rates.delta_e, self.temperature)

    def transmission(self, grid: DriveGrid, geometry: Geometry, *, thermal: bool = False) -> NDArray[np.float64]:
        """Transmitted intensity |S|^2 of the chosen port, optionally thermally averaged."""
        from opencqed.scattering import Channel, s_drop, s_thru, thermal_average
        from opencqed.scattering import Geometry as _Geometry

        if thermal:
            return thermal_average(self, grid, geometry, Channel.TRANSMISSION)
        spectrum = s_drop(self, grid) if geometry == _Geometry.DROP else s_thru(self, grid)
        return spectrum.intensity

    def to_dict(self) -> dict[str, float | dict[str, float]]:
        return {"rates": self.rates.to_dict(), "temperature_k": self.temperature}


def cooperativity(rates: RateSet) -> float:
    """Cooperativity C = 4g^2 / (kappa gamma), with kappa the total cavity linewidth."""
    kappa = rates.kappa_total
    if kappa <= 0 or rates.gamma <= 0:
        msg = "cooperativity needs a positive cavity linewidth and emitter linewidth"
        raise DomainError(msg)
    return 4 * rates.g**2 / (kappa * rates.gamma)


def purcell_factor(
    q: float, v_norm: float, overlap: float, dipole_tilt_deg: float = DEFAULT_DIPOLE_TILT_DEG
) -> float:
    """Purcell enhancement F = (3 / 4pi^2) (Q / V) overlap cos(tilt).

    Args:
        q: quality factor.
        v_norm: mode volume in units of (lambda / n)^3.
        overlap: squared normalized field projection at the emitter site.
        dipole_tilt_deg: angle between the emitter dipole and the cavity field polarization.

    Returns:
        The Purcell factor.
    """
    if q <= 0 or v_norm <= 0:
        msg = "q and v_norm must be positive"
        raise ValueError(msg)
    return PURCELL_PREFACTOR * (q / v_norm) * overlap * math.cos(math.radians(dipole_tilt_deg))


def cooperativity_from_purcell(f: float, quantum_efficiency: float, debye_waller: float) -> float:
    for name, value in (("quantum_efficiency", quantum_efficiency), ("debye_waller", debye_waller)):
        if not 0 <= value <= 1:
            msg = f"{name} must lie in [0, 1]"
            raise ValueError(msg)
    return quantum_efficiency * debye_waller * f


def bright_population(delta_e: float, temperature: float) -> float:
    """Boltzmann population of the optically bright lower orbital branch.

    Args:
        delta_e: ground-state orbital splitting as a cyclic frequency, Delta E / h, in Hz.
        temperature: temperature in K.

    Returns:
        p_g = 1 / (1 + exp(-Delta E / k_B T)).
    """
    if temperature <= 0:
        msg = "temperature must be positive"
        raise ValueError(msg)
    return float(special.expit(constants.h * delta_e / (constants.k * temperature)))


def overlap_at_depth(
    depth: ArrayLike,
    decay_len_z: float,
    overlap_surface_ref: float,
    depth_ref: float = OVERLAP_DEPTH_REF,
) -> NDArray[np.float64]:
    """Evanescent overlap surrogate, pinned to `overlap_surface_ref` at `depth_ref`."""
    if decay_len_z <= 0:
        msg = "decay_len_z must be positive"
        raise ValueError(msg)
    z = np.asarray(depth, dtype=np.float64)
    return np.asarray(overlap_surface_ref * np.exp(-(z - depth_ref) / decay_len_z), dtype=np.float64)


def effective_mode_area(
    mode: CavityMode,
    wavelength: float | None = None,
    refractive_index: float = GAP_REFRACTIVE_INDEX,
    slab_thickness: float = DEVICE_HEIGHT,
) -> float:
    """Area of the Gaussian in-plane mode envelope, from the normalized mode volume.

    The mode volume v_norm (lambda / n)^3 is spread over a z-extent made of the guiding slab plus an evanescent tail
    of one decay length on either face.

    Args:
        mode: the cavity mode.
        wavelength: vacuum wavelength, defaults to the mode's own wavelength.
        refractive_index: index n of the guiding layer.
        slab_thickness: thickness of the guiding layer.

    Returns:
        The effective in-plane area in m^2.
    """
    lam = mode.wavelength if wavelength is None else wavelength
    volume = mode.v_norm * (lam / refractive_index) ** 3
    return volume / (slab_thickness + 2 * mode.decay_len_z)


def local_cooperativity(
    q: float,
    v_norm: float,
    overlap: ArrayLike,
    radiative_efficiency: float,
    dipole_tilt_deg: float = DEFAULT_DIPOLE_TILT_DEG,
) -> NDArray[np.float64]:
    """Cooperativity of an emitter seeing the given local overlap, (gamma_0 / gamma) F.

    F is the Purcell factor of ``purcell_factor``, dipole projection included, evaluated elementwise over `overlap`.
    """
    if q <= 0 or v_norm <= 0:
        msg = "q and v_norm must be positive"
        raise ValueError(msg)
    projection = math.cos(math.radians(dipole_tilt_deg))
    return np.asarray(
        radiative_efficiency * PURCELL_PREFACTOR * (q / v_norm) * projection * np.asarray(overlap, dtype=np.float64),
        dtype=np.float64,
    )


def _envelope_fraction_above(peak: NDArray[np.float64], c_threshold: float) -> NDArray[np.float64]:
    """Envelope-weighted fraction of the in-plane area where peak * exp(-r^2 / 2 sigma^2) exceeds `c_threshold`.

    The region is a disk of radius R with exp(-R^2 / 2 sigma^2) = c_threshold / peak, over which the unit-height
    Gaussian integrates to (1 - c_threshold / peak) times its full integral.
    """
    if c_threshold < 0:
        return np.ones_like(peak)
    fraction = np.zeros_like(peak)
    above = peak > c_threshold
    fraction[above] = 1.0 - c_threshold / peak[above]
    return fraction


def expected_coupled_emitters(
    q: float,
    c_threshold: float,
    emitter: EmitterParams,
    mode: CavityMode,
    mode_area: float,
    samples: int = 100_000,
    seed: int = 0,
) -> float:
    """Monte-Carlo estimate of the mean number of emitters with a cooperativity above `c_threshold`.

    Emitters are counted against the in-plane mode envelope, a unit-height 2-D Gaussian with integral `mode_area`, so
    a threshold of zero yields the areal density times `mode_area`. The in-plane integral is closed form; depths are
    sampled from the implantation profile (a normal distribution truncated to the diamond side of the interface). The
    same depth samples are used for every `q` and threshold, so the estimate is monotone in both for a fixed seed.

    Args:
        q: quality factor of the mode.
        c_threshold: cooperativity threshold.
        emitter: emitter distribution and efficiencies.
        mode: cavity mode, providing v_norm, the overlap at the mean depth and the evanescent decay length.
        mode_area: effective area of the in-plane envelope, e.g. from ``effective_mode_area``.
        samples: number of Monte-Carlo depth samples.
        seed: seed of the sampling streams.

    Returns:
        Expected emitter count.
    """
    if samples < MIN_MONTE_CARLO_SAMPLES:
        msg = f"at least {MIN_MONTE_CARLO_SAMPLES} samples are needed, got {samples}"
        raise ConfigError(msg, field="samples")
    if mode_area <= 0:
        msg = "mode_area must be positive"
        raise ValueError(msg)
    if emitter.areal_density == 0:
        return 0.0

    depth_distribution = stats.truncnorm(
        a=-emitter.depth_mean / emitter.depth_sigma, b=np.inf, loc=emitter.depth_mean, scale=emitter.depth_sigma
    )
    weight = 0.0
    for index, (start, stop) in enumerate(chunk_bounds(samples, MONTE_CARLO_PARTITION)):
        rng = substream(seed, index)
        z = depth_distribution.rvs(size=stop - start, random_state=rng)
        overlap = overlap_at_depth(z, mode.decay_len_z, mode.overlap, emitter.depth_mean)
        peak = local_cooperativity(q, mode.v_norm, overlap, emitter.radiative_efficiency)
        weight += float(np.sum(_envelope_fraction_above(peak, c_threshold)))

    expected = emitter.areal_density * mode_area * weight / samples
    logger.debug("expected coupled emitters at Q=%g, C>%g: %g", q, c_threshold, expected)
    return expected


def expected_coupled_emitters_curve(
    q_values: ArrayLike,
    c_threshold: float,
    emitter: EmitterParams,
    mode: CavityMode,
    mode_area: float,
    samples: int = 100_000,
    seed: int = 0,
) -> NDArray[np.float64]:
    counts = [
        expected_coupled_emitters(q, c_threshold, emitter, mode, mode_area, samples, seed)
        for q in as_float_array(q_values)
    ]
    return as_float_array(counts)

"""Forward synthesis of measured spectra: broadband cavity peaks, DIT scans and shot noise."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from opencqed.common import as_float_array, chunk_bounds, substream
from opencqed.core_model import CoupledSystem
from opencqed.exceptions import InvalidModelError
from opencqed.scattering import DriveGrid, Geometry, spectrum, thermal_average

logger = logging.getLogger(__name__)

DEFAULT_BASELINE_COUNTS = 590.0
DEFAULT_EXPOSURE_S = 1.0
SAMPLE_CHUNK = 4096

Coefficients = tuple[float, float, float]


@dataclass(frozen=True)
class BroadbandModel:
    """Lorentzian cavity peak on a quadratic background, expanded about the resonance f0."""

    amplitude_a: float
    f0: float
    kappa: float
    b0: float = 0.0
    b1: float = 0.0
    b2: float = 0.0
    baseline: float = DEFAULT_BASELINE_COUNTS

    def __post_init__(self) -> None:
        if self.kappa <= 0:
            msg = "kappa must be positive"
            raise InvalidModelError(msg)
        if self.amplitude_a < 0 or self.baseline < 0:
            msg = "amplitude and baseline must be non-negative"
            raise InvalidModelError(msg)

    def background_ratio(self) -> Coefficients:
        """Background coefficients relative to the peak amplitude, baseline included in the constant term."""
        if self.amplitude_a == 0:
            msg = "the background ratio is undefined for a zero amplitude"
            raise InvalidModelError(msg)
        a = self.amplitude_a
        return (self.b0 + self.baseline) / a, self.b1 / a, self.b2 / a

    def to_dict(self) -> dict[str, float]:
        return {
            "amplitude_a": self.amplitude_a,
            "f0_hz": self.f0,
            "kappa_hz": self.kappa,
            "b0": self.b0,
            "b1": self.b1,
            "b2": self.b2,
            "baseline": self.baseline,
        }


@dataclass(frozen=True)
class DitModel:
    sys: CoupledSystem
    geometry: Geometry = Geometry.DROP
    bg_ratio: Coefficients = (0.0, 0.0, 0.0)
    fp: Coefficients = (1.0, 0.0, 0.0)
    thermal: bool = False

    def __post_init__(self) -> None:
        if not all(math.isfinite(c) for c in (*self.bg_ratio, *self.fp)):
            msg = "background and Fabry-Perot coefficients must be finite"
            raise InvalidModelError(msg)

    def to_dict(self) -> dict[str, object]:
        return {
            "system": self.sys.to_dict(),
            "geometry": self.geometry.value,
            "bg_ratio": list(self.bg_ratio),
            "fp": list(self.fp),
            "thermal": self.thermal,
        }


@dataclass(frozen=True, eq=False)
class SampledSpectrum:
    frequencies: NDArray[np.float64]
    counts: NDArray[np.int64]
    exposure: float = DEFAULT_EXPOSURE_S
    metadata: dict[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.frequencies.shape != self.counts.shape:
            msg = "frequencies and counts differ in length"
            raise ValueError(msg)
        if np.any(self.counts < 0):
            msg = "counts must be non-negative"
            raise ValueError(msg)
        if self.exposure <= 0:
            msg = "exposure must be positive"
            raise ValueError(msg)

    def __len__(self) -> int:
        return int(self.counts.size)


@dataclass(frozen=True)
class SystemEfficiency:
    """Optical efficiencies between the laser, the sample and the detector."""

    input_path: float = 0.5
    output_optics: float = 0.725
    output_polarizer: float = 0.5
    detector: float = 0.207
    grating_output: float = 1.0

    def collection(self) -> float:
        """Sample-to-detector collection efficiency."""
        return self.output_optics * self.output_polarizer * self.detector * self.grating_output


def broadband_intensity(model: BroadbandModel, freqs: ArrayLike) -> NDArray[np.float64]:
    f = as_float_array(freqs)
    if not np.all(np.isfinite(f)):
        msg = "frequencies must be finite"
        raise ValueError(msg)
    offset = f - model.f0
    half_width_sq = (model.kappa / 2) ** 2
    lorentzian = model.amplitude_a * half_width_sq / (offset**2 + half_width_sq)
    return lorentzian + model.b0 + model.b1 * offset + model.b2 * offset**2 + model.baseline


def fabry_perot_envelope(fp: Coefficients, detunings: ArrayLike, emitter_detuning: float) -> NDArray[np.float64]:
    u = as_float_array(detunings) - emitter_detuning
    return fp[0] + fp[1] * u + fp[2] * u**2


def dit_intensity(model: DitModel, grid: DriveGrid) -> NDArray[np.float64]:
    """DIT fit model y = [T + (b0 + b1 delta + b2 delta^2) / a] (f0 + f1 (delta - Delta) + f2 (delta - Delta)^2)."""
    delta = grid.detunings
    envelope = fabry_perot_envelope(model.fp, delta, model.sys.rates.detuning)
    if np.any(envelope <= 0):
        msg = "the Fabry-Perot envelope must stay positive over the scan window"
        raise InvalidModelError(msg)
    if model.thermal:
        transmission = thermal_average(model.sys, grid, model.geometry)
    else:
        transmission = spectrum(model.sys, grid, model.geometry).intensity
    r0, r1, r2 = model.bg_ratio
    return (transmission + r0 + r1 * delta + r2 * delta**2) * envelope


def counts_per_point(rate_cps: ArrayLike, exposure: float = DEFAULT_EXPOSURE_S) -> NDArray[np.float64]:
    return as_float_array(rate_cps) * exposure


def expected_counts(
    intensity: ArrayLike,
    photon_rate: float,
    efficiency: SystemEfficiency | None = None,
    exposure: float = DEFAULT_EXPOSURE_S,
) -> NDArray[np.float64]:
    """Detected counts per point for a normalized intensity and an input photon rate at the laser."""
    eff = SystemEfficiency() if efficiency is None else efficiency
    rate = as_float_array(intensity) * photon_rate * eff.input_path * eff.collection()
    return counts_per_point(rate, exposure)


def sample_counts(
    expected: ArrayLike,
    seed: int,
    *,
    frequencies: ArrayLike | None = None,
    exposure: float = DEFAULT_EXPOSURE_S,
) -> SampledSpectrum:
    """Draws independent Poisson counts for every point.

    Points are split in fixed-size chunks that each own a generator derived from ``(seed, chunk index)``.
    """
    mean = as_float_array(expected)
    if np.any(mean < 0) or not np.all(np.isfinite(mean)):
        msg = "expected counts must be finite and non-negative"
        raise ValueError(msg)
    counts = np.empty(mean.size, dtype=np.int64)
    for index, (start, stop) in enumerate(chunk_bounds(mean.size, SAMPLE_CHUNK)):
        counts[start:stop] = substream(seed, index).poisson(mean[start:stop])
    freqs = np.arange(mean.size, dtype=np.float64) if frequencies is None else as_float_array(frequencies)
    return SampledSpectrum(freqs, counts, exposure)

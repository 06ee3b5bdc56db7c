"""Device geometry: the chirped hole lattice, the coupling sweep of a device pattern and grating-coupler arcs."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.typing import NDArray

from opencqed.common import NM, UM
from opencqed.exceptions import InvalidModelError
from opencqed.scattering import Geometry

# Published optimum of the chirped nanobeam.
A_CAV = 132.5 * NM
A_MIR = 140.1 * NM
N_CAV = 12
N_MIR = 25

THRU_COUPLING_DISTANCES = tuple(d * NM for d in range(50, 141, 10))
THRU_MIRROR_HOLES = 25
DROP_MIRROR_HOLES = tuple(range(4, 14))
PATTERN_ROWS = 10
PATTERN_COLUMNS = (Geometry.THRU, Geometry.THRU, Geometry.DROP, Geometry.DROP)

DOSE_ROWS = 5
SIZE_COLUMNS = 7
DOSE_STEP = 0.05
HOLE_SIZE_STEP = 0.02
ARRAY_SCALES = (1.0, 1.015, 1.03)

GRATING_PERIODS = 4
GRATING_START = 3 * UM
GRATING_PERIOD = 0.5 * UM
GRATING_DUTY_CYCLE = 0.4
GRATING_ECCENTRICITY = 0.2
GRATING_AXIS_ANGLE_DEG = -30.0
GRATING_SPAN_DEG = 45.0
ARC_SAMPLES = 91


@dataclass(frozen=True)
class ChirpSpec:
    """Hole spacing of a quadratically chirped nanobeam.

    The spacing grows from ``a_cav`` at the centre to ``a_mir`` over ``n_cav`` holes, followed by ``n_mir`` mirror
    holes of constant spacing ``a_mir`` on each side.
    """

    a_cav: float = A_CAV
    a_mir: float = A_MIR
    n_cav: int = N_CAV
    n_mir: int = N_MIR

    def __post_init__(self) -> None:
        if self.n_cav < 2:
            msg = f"the taper needs at least 2 holes, got {self.n_cav}"
            raise InvalidModelError(msg)
        if self.n_mir < 0:
            msg = f"the number of mirror holes cannot be negative, got {self.n_mir}"
            raise InvalidModelError(msg)
        if self.a_cav <= 0 or self.a_mir <= 0:
            msg = "lattice constants must be positive"
            raise InvalidModelError(msg)

    def spacing(self, n: int) -> float:
        """Spacing of taper hole ``n``, 0 <= n < n_cav."""
        if not 0 <= n < self.n_cav:
            msg = f"taper hole index {n} outside [0, {self.n_cav})"
            raise ValueError(msg)
        if n == self.n_cav - 1:
            return self.a_mir
        return self.a_cav + (self.a_mir - self.a_cav) * n**2 / (self.n_cav - 1) ** 2


def chirp_half_lattice(spec: ChirpSpec) -> list[float]:
    """Spacings from the cavity centre outwards: the taper followed by the mirror section."""
    return [spec.spacing(n) for n in range(spec.n_cav)] + [spec.a_mir] * spec.n_mir


def chirp_lattice(spec: ChirpSpec) -> list[float]:
    """Spacings of the full device from one end to the other, mirrored about the cavity centre."""
    half = chirp_half_lattice(spec)
    return half[::-1] + half


def hole_positions(spec: ChirpSpec) -> NDArray[np.float64]:
    """Hole centres along the beam axis, symmetric about the cavity centre at 0."""
    half = np.cumsum(chirp_half_lattice(spec)) - chirp_half_lattice(spec)[0] / 2
    return np.concatenate([-half[::-1], half])


@dataclass(frozen=True)
class DeviceSpec:
    """One device of the coupling sweep; ``coupling_distance`` is None for drop devices."""

    row: int
    geometry: Geometry
    n_mir: int
    coupling_distance: float | None = None

    def to_dict(self) -> dict[str, object]:
        return {
            "row": self.row,
            "geometry": self.geometry.value,
            "n_mir": self.n_mir,
            "coupling_distance_m": self.coupling_distance,
        }


def coupling_sweep(kind: Geometry) -> list[DeviceSpec]:
    """The ten-row coupling sweep of a device column, from the most to the least over-coupled device."""
    if kind is Geometry.THRU:
        return [
            DeviceSpec(row, kind, THRU_MIRROR_HOLES, distance)
            for row, distance in enumerate(THRU_COUPLING_DISTANCES)
        ]
    return [DeviceSpec(row, kind, n_mir) for row, n_mir in enumerate(DROP_MIRROR_HOLES)]


@dataclass(frozen=True)
class PatternDevice:
    row: int
    column: int
    device: DeviceSpec


def device_pattern() -> list[PatternDevice]:
    """The 10 x 4 device pattern: two identical thru columns on the left, two identical drop columns on the right."""
    sweeps = {kind: coupling_sweep(kind) for kind in set(PATTERN_COLUMNS)}
    return [
        PatternDevice(row, column, sweeps[kind][row])
        for row in range(PATTERN_ROWS)
        for column, kind in enumerate(PATTERN_COLUMNS)
    ]


@dataclass(frozen=True)
class PatternCopy:
    """A copy of the device pattern written with a modified lithography dose and hole size."""

    row: int
    column: int
    dose_factor: float
    hole_scale: float
    lattice_scale: float = 1.0


def dose_size_array(
    lattice_scale: float = 1.0, dose_step: float = DOSE_STEP, hole_size_step: float = HOLE_SIZE_STEP
) -> list[PatternCopy]:
    """The 5 x 7 array of pattern copies: the dose varies linearly along rows, the hole size along columns.

    Both modulations are centred on the middle row and column, where the nominal dose and hole size are used.
    """
    return [
        PatternCopy(
            row,
            column,
            1 + (row - (DOSE_ROWS - 1) / 2) * dose_step,
            1 + (column - (SIZE_COLUMNS - 1) / 2) * hole_size_step,
            lattice_scale,
        )
        for row in range(DOSE_ROWS)
        for column in range(SIZE_COLUMNS)
    ]


class ArcEdge(str, Enum):
    SLOT_START = "slot_start"
    SLOT_END = "slot_end"


@dataclass(frozen=True)
class GratingSpec:
    """Elliptical grating coupler.

    The slots are arcs of ellipses sharing a focus on the input waveguide. The major-axis parameter of period n starts
    at ``a0 + n * period`` and its slot spans ``[a_n + duty_cycle * period, a_n + period]``.
    """

    periods: int = GRATING_PERIODS
    a0: float = GRATING_START
    period: float = GRATING_PERIOD
    duty_cycle: float = GRATING_DUTY_CYCLE
    eccentricity: float = GRATING_ECCENTRICITY
    axis_angle_deg: float = GRATING_AXIS_ANGLE_DEG
    span_deg: float = GRATING_SPAN_DEG

    def __post_init__(self) -> None:
        if not 0 <= self.eccentricity < 1:
            msg = f"the eccentricity must lie in [0, 1), got {self.eccentricity}"
            raise InvalidModelError(msg)
        if self.periods < 1 or self.a0 <= 0 or self.period <= 0:
            msg = "a grating needs at least one period and positive lengths"
            raise InvalidModelError(msg)
        if not 0 < self.duty_cycle < 1:
            msg = f"the duty cycle must lie in (0, 1), got {self.duty_cycle}"
            raise InvalidModelError(msg)

    def radius(self, a: float, theta: NDArray[np.float64]) -> NDArray[np.float64]:
        """Focal radius r(theta) = a (1 - e^2) / (1 - e cos(theta - phi))."""
        e = self.eccentricity
        phi = math.radians(self.axis_angle_deg)
        return np.asarray(a * (1 - e**2) / (1 - e * np.cos(theta - phi)), dtype=np.float64)


@dataclass(frozen=True, eq=False)
class GratingArc:
    period: int
    edge: ArcEdge
    major_axis: float
    x: NDArray[np.float64]
    y: NDArray[np.float64]


def grating_arcs(spec: GratingSpec | None = None, samples: int = ARC_SAMPLES) -> list[GratingArc]:
    """Sampled slot edges of an elliptical grating, ``samples`` points per arc over the grating span.

    The arcs are centred on the waveguide axis (theta = 0) with the focus at the origin.
    """
    spec = GratingSpec() if spec is None else spec
    half_span = math.radians(spec.span_deg) / 2
    theta = np.linspace(-half_span, half_span, samples)
    arcs = []
    for n in range(spec.periods):
        a_n = spec.a0 + n * spec.period
        edges = ((ArcEdge.SLOT_START, a_n + spec.duty_cycle * spec.period), (ArcEdge.SLOT_END, a_n + spec.period))
        for edge, a in edges:
            r = spec.radius(a, theta)
            arcs.append(GratingArc(n, edge, a, r * np.cos(theta), r * np.sin(theta)))
    return arcs

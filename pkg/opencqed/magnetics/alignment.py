"""Orientation of the applied field relative to the emitter symmetry axes, and the magnet placements that set it."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import optimize

from opencqed.common import ANGLE_111_FROM_001_DEG, MM, unit_vector
from opencqed.exceptions import NoConvergenceError, ZeroFieldError
from opencqed.magnetics.cylinder import CylMagnet, field_at, mount_magnet

logger = logging.getLogger(__name__)

# Device positions in the sample plane z = 0, relative to the centre of the mount.
IDEAL_DEVICE_POSITION = (3.0 * MM, 0.0)
SAMPLE_POINT = (3.014 * MM, 0.190 * MM, 0.0)
SAMPLE_STANDOFF = 0.5 * MM
TARGET_FIELD = 0.26
EXTERNAL_STANDOFF = 55 * MM
# Stand-off quoted alongside the simulated alpha map.
EXTERNAL_STANDOFF_ALT = 57 * MM
PLACEMENT_TOLERANCE = 2 * MM
OFFSET_SCAN_POINTS = 64

_EDGE_AXES_CRYSTAL = ((1, 1, 0), (-1, 1, 0))
_SIV_AXES_CRYSTAL = ((1, 1, 1), (-1, 1, 1), (1, -1, 1), (-1, -1, 1))
_COUPLED_CRYSTAL = ((-1, 1, 1), (1, -1, 1))


@dataclass(frozen=True, eq=False)
class CrystalFrame:
    """Lab-frame directions of a (001) diamond.

    ``edge_axes`` are the in-plane <110> directions, ``siv_axes`` the four <111> emitter symmetry axes, and ``coupled``
    flags the two orientations whose dipole lies perpendicular to a cavity along the first edge axis.
    """

    edge_axes: tuple[NDArray[np.float64], NDArray[np.float64]]
    siv_axes: tuple[NDArray[np.float64], ...]
    coupled: tuple[bool, ...]
    normal: NDArray[np.float64] = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    @classmethod
    def diamond_001(cls, rotation_deg: float = 0.0) -> CrystalFrame:
        """Diamond with [001] along lab z, the cavity axis [110] along lab y and [-110] along lab x.

        ``rotation_deg`` rotates the crystal about lab z, for a sample that sits slightly rotated on its mount.
        """
        phi = math.radians(rotation_deg)
        turn = np.array([[math.cos(phi), -math.sin(phi), 0.0], [math.sin(phi), math.cos(phi), 0.0], [0.0, 0.0, 1.0]])
        basis = np.array([[-1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        basis = basis / np.linalg.norm(basis, axis=1, keepdims=True)
        to_lab = turn @ basis

        def lab(v: Sequence[int]) -> NDArray[np.float64]:
            return unit_vector(to_lab @ np.asarray(v, dtype=np.float64))

        return cls(
            (lab(_EDGE_AXES_CRYSTAL[0]), lab(_EDGE_AXES_CRYSTAL[1])),
            tuple(lab(v) for v in _SIV_AXES_CRYSTAL),
            tuple(v in _COUPLED_CRYSTAL for v in _SIV_AXES_CRYSTAL),
        )

    def coupled_axes(self) -> list[NDArray[np.float64]]:
        return [axis for axis, flag in zip(self.siv_axes, self.coupled) if flag]


def misalignment(b: ArrayLike, siv_axis: ArrayLike) -> float:
    """Angle in degrees between the field and an emitter axis, insensitive to the sign of either.

    Raises:
        ZeroFieldError: ``b`` vanishes.
    """
    field_vector = np.asarray(b, dtype=np.float64)
    norm = float(np.linalg.norm(field_vector))
    if norm == 0:
        msg = "the misalignment of a zero field is undefined"
        raise ZeroFieldError(msg)
    axis = unit_vector(siv_axis)
    cosine = min(abs(float(field_vector @ axis)) / norm, 1.0)
    return math.degrees(math.acos(cosine))


def polar_angle(b: ArrayLike) -> float:
    """Angle in degrees between the field and lab +z."""
    v = np.asarray(b, dtype=np.float64)
    return math.degrees(math.atan2(math.hypot(v[0], v[1]), v[2]))


def calibrate_mount_offset(
    magnet: CylMagnet,
    standoff: float = SAMPLE_STANDOFF,
    device: tuple[float, float] = IDEAL_DEVICE_POSITION,
    target_polar_deg: float = ANGLE_111_FROM_001_DEG,
) -> CylMagnet:
    """Places the mount magnet so that the field at ``device`` tilts from the sample normal by the target angle.

    The magnet keeps its axis along lab z with its north face ``standoff`` below the sample plane z = 0, and is shifted
    along x. Its axis ends up at the smallest distance from the device, inside three magnet radii, where the field
    reaches the target tilt.

    Raises:
        NoConvergenceError: the field never reaches the target tilt within that range.
    """
    axial = replace(magnet, axis=(0.0, 0.0, 1.0))
    height = magnet.half_length + standoff

    def mismatch(distance: float) -> float:
        b_field = axial.moved_to((0.0, 0.0, 0.0)).field((distance, 0.0, height))
        return polar_angle(b_field) - target_polar_deg

    distances = np.linspace(0.0, 3 * magnet.radius, OFFSET_SCAN_POINTS)
    values = [mismatch(float(d)) for d in distances]
    for low, high, f_low, f_high in zip(distances, distances[1:], values, values[1:]):
        if f_low < 0 <= f_high:
            distance = optimize.brentq(mismatch, low, high, xtol=1e-12 * magnet.radius)
            break
    else:
        msg = f"the field tilt never reaches {target_polar_deg:.3f} deg at a stand-off of {standoff:.3g} m"
        raise NoConvergenceError(msg)

    x_device, y_device = device
    placed = axial.moved_to((x_device - distance, y_device, -height))
    logger.info("mount magnet axis placed %.4g m from the device", distance)
    return placed


def calibrate_remanence(magnet: CylMagnet, point: ArrayLike, target_field: float = TARGET_FIELD) -> CylMagnet:
    """Rescales the remanence so that the magnet alone produces ``target_field`` tesla at ``point``."""
    magnitude = float(np.linalg.norm(magnet.field(point)))
    if magnitude == 0:
        msg = "the magnet produces no field at the calibration point"
        raise ZeroFieldError(msg)
    return replace(magnet, remanence_br=magnet.remanence_br * target_field / magnitude)


def calibrated_mount(standoff: float = SAMPLE_STANDOFF, target_field: float = TARGET_FIELD) -> CylMagnet:
    """Mount magnet aligned for the ideal device position and calibrated to the target field at the sample point."""
    placed = calibrate_mount_offset(mount_magnet(), standoff)
    return calibrate_remanence(placed, SAMPLE_POINT, target_field)


@dataclass(frozen=True)
class PlaneGrid:
    """External-magnet centres (x, y, z) with a fixed x and a rectangular grid of y and z."""

    x: float
    y: tuple[float, ...]
    z: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.y or not self.z:
            msg = "the placement grid is empty"
            raise ValueError(msg)

    @classmethod
    def around(cls, x: float, half_width: float, step: float, center: tuple[float, float] = (0.0, 0.0)) -> PlaneGrid:
        n = int(round(half_width / step))
        offsets = [i * step for i in range(-n, n + 1)]
        return cls(x, tuple(center[0] + o for o in offsets), tuple(center[1] + o for o in offsets))

    def positions(self) -> NDArray[np.float64]:
        yy, zz = np.meshgrid(np.asarray(self.y), np.asarray(self.z), indexing="ij")
        return np.stack([np.full_like(yy, self.x), yy, zz], axis=-1)


@dataclass(frozen=True, eq=False)
class AlphaMap:
    """Misalignment and field strength at the sample for every external-magnet placement, indexed [iy, iz]."""

    grid: PlaneGrid
    alpha_deg: NDArray[np.float64]
    b_tesla: NDArray[np.float64]
    mount_alpha_deg: float
    mount_b_tesla: float

    @property
    def argmin(self) -> tuple[int, int]:
        iy, iz = np.unravel_index(int(np.argmin(self.alpha_deg)), self.alpha_deg.shape)
        return int(iy), int(iz)

    @property
    def best_position(self) -> tuple[float, float, float]:
        iy, iz = self.argmin
        return self.grid.x, self.grid.y[iy], self.grid.z[iz]

    @property
    def min_alpha(self) -> float:
        return float(np.min(self.alpha_deg))

    def neighbourhood_max(self, tolerance: float = PLACEMENT_TOLERANCE) -> float:
        """Largest misalignment over the placements within ``tolerance`` of the best one along y and z."""
        _, y_best, z_best = self.best_position
        near_y = np.abs(np.asarray(self.grid.y) - y_best) <= tolerance * (1 + 1e-9)
        near_z = np.abs(np.asarray(self.grid.z) - z_best) <= tolerance * (1 + 1e-9)
        return float(np.max(self.alpha_deg[np.ix_(near_y, near_z)]))

    def rows(self) -> list[list[float]]:
        return [
            [y, z, float(self.alpha_deg[iy, iz]), float(self.b_tesla[iy, iz])]
            for iy, y in enumerate(self.grid.y)
            for iz, z in enumerate(self.grid.z)
        ]


def external_sweep(
    mount: CylMagnet | Sequence[CylMagnet],
    external: CylMagnet | None,
    plane_grid: PlaneGrid,
    sample_point: ArrayLike = SAMPLE_POINT,
    siv_axis: ArrayLike | None = None,
) -> AlphaMap:
    """Misalignment at ``sample_point`` as the external magnet (orientation taken from ``external``) is moved over
    ``plane_grid``. Without an external magnet every placement reports the mount-only values.
    """
    mounts = [mount] if isinstance(mount, CylMagnet) else list(mount)
    axis = CrystalFrame.diamond_001().coupled_axes()[0] if siv_axis is None else unit_vector(siv_axis)
    point = np.asarray(sample_point, dtype=np.float64)
    b_mount = field_at(mounts, point)
    mount_alpha = misalignment(b_mount, axis)
    shape = (len(plane_grid.y), len(plane_grid.z))

    if external is None:
        alpha = np.full(shape, mount_alpha)
        magnitude = np.full(shape, float(np.linalg.norm(b_mount)))
    else:
        template = external.moved_to((0.0, 0.0, 0.0))
        total = b_mount + template.field(point - plane_grid.positions())
        magnitude = np.linalg.norm(total, axis=-1)
        if np.any(magnitude == 0):
            msg = "the field vanishes at the sample for some placement"
            raise ZeroFieldError(msg)
        cosine = np.minimum(np.abs(total @ axis) / magnitude, 1.0)
        alpha = np.degrees(np.arccos(cosine))

    result = AlphaMap(plane_grid, alpha, magnitude, mount_alpha, float(np.linalg.norm(b_mount)))
    logger.info(
        "external sweep: mount-only alpha %.3f deg, best %.3f deg at %s",
        mount_alpha,
        result.min_alpha,
        result.best_position,
    )
    return result

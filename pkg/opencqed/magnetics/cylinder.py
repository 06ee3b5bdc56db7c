"""Field of axially magnetized cylindrical permanent magnets.

A uniformly magnetized cylinder is equivalent to a solenoid sheet current of density Br / mu0 on its side surface. The
closed form integrates the current-loop field over that sheet; the complete elliptic integrals it needs are expressed
in Carlson symmetric form, which stays accurate close to the rim.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import constants, integrate, special

from opencqed.common import MM, is_unit_vector
from opencqed.exceptions import SingularFieldError

logger = logging.getLogger(__name__)

MU_0 = constants.mu_0
SMCO_REMANENCE = 1.1
NDFEB_REMANENCE = 1.3
RIM_TOLERANCE = 1e-9
QUADRATURE_RTOL = 1e-12


@dataclass(frozen=True)
class CylMagnet:
    """Cylindrical permanent magnet magnetized along its symmetry ``axis``.

    Args:
        diameter: m.
        thickness: length along the axis, m.
        remanence_br: remanent flux density, T.
        center: centre of the cylinder, m.
        axis: unit vector pointing from the south to the north face.
    """

    diameter: float
    thickness: float
    remanence_br: float
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    axis: tuple[float, float, float] = (0.0, 0.0, 1.0)

    def __post_init__(self) -> None:
        if self.diameter <= 0 or self.thickness <= 0 or self.remanence_br <= 0:
            msg = "diameter, thickness and remanence_br must be positive"
            raise ValueError(msg)
        if not is_unit_vector(self.axis):
            msg = f"the magnet axis {self.axis} is not a unit vector"
            raise ValueError(msg)
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        object.__setattr__(self, "axis", tuple(float(v) for v in self.axis))

    @property
    def radius(self) -> float:
        return self.diameter / 2

    @property
    def half_length(self) -> float:
        return self.thickness / 2

    @property
    def volume(self) -> float:
        return math.pi * self.radius**2 * self.thickness

    @property
    def moment(self) -> NDArray[np.float64]:
        """Magnetic dipole moment Br V / mu0 in A m^2."""
        return self.remanence_br * self.volume / MU_0 * np.asarray(self.axis)

    def moved_to(self, center: ArrayLike) -> CylMagnet:
        c = np.asarray(center, dtype=np.float64)
        return CylMagnet(self.diameter, self.thickness, self.remanence_br, (c[0], c[1], c[2]), self.axis)

    def local_coordinates(
        self, points: ArrayLike
    ) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
        """Axial coordinate, radial distance and radial unit vectors of ``points`` (shape (..., 3))."""
        axis = np.asarray(self.axis)
        d = np.asarray(points, dtype=np.float64) - np.asarray(self.center)
        z = np.asarray(np.sum(d * axis, axis=-1))
        transverse = d - z[..., None] * axis
        rho = np.asarray(np.linalg.norm(transverse, axis=-1))
        with np.errstate(invalid="ignore", divide="ignore"):
            rho_hat = np.where(rho[..., None] > 0, transverse / rho[..., None], 0.0)
        return z, rho, rho_hat

    def is_inside(self, points: ArrayLike) -> NDArray[np.bool_]:
        z, rho, _ = self.local_coordinates(points)
        return np.asarray((rho < self.radius) & (np.abs(z) < self.half_length))

    def field(self, points: ArrayLike) -> NDArray[np.float64]:
        """Flux density in T at ``points`` (shape (..., 3)).

        Raises:
            SingularFieldError: a point lies on one of the two rim circles.
        """
        z, rho, rho_hat = self.local_coordinates(points)
        inside = self.is_inside(points)
        if np.any(inside):
            logger.warning("%d field evaluations lie inside a magnet body", int(np.count_nonzero(inside)))
        b_rho, b_z = cylinder_field_local(rho, z, self.radius, self.half_length, self.remanence_br)
        return np.asarray(b_rho[..., None] * rho_hat + b_z[..., None] * np.asarray(self.axis), dtype=np.float64)


def _cel_radial(kc2: NDArray[np.float64]) -> NDArray[np.float64]:
    """Bulirsch cel(kc, 1, 1, -1)."""
    return np.asarray(special.elliprf(0, kc2, 1) - 2 / 3 * special.elliprj(0, kc2, 1, 1), dtype=np.float64)


def _cel_axial(kc2: NDArray[np.float64], gamma: NDArray[np.float64]) -> NDArray[np.float64]:
    """Bulirsch cel(kc, gamma^2, 1, gamma); the second term vanishes on the cylinder surface gamma = 0."""
    rf = special.elliprf(0, kc2, 1)
    p = np.where(gamma == 0, 1.0, gamma**2)
    rj = special.elliprj(0, kc2, 1, p)
    return np.asarray(rf + np.where(gamma == 0, 0.0, (gamma - gamma**2) / 3 * rj), dtype=np.float64)


def cylinder_field_local(
    rho: ArrayLike, z: ArrayLike, radius: float, half_length: float, remanence_br: float
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Radial and axial flux density of a cylinder centred at the origin, magnetized along +z.

    Args:
        rho: radial distances from the axis, m.
        z: axial coordinates, m.
        radius: cylinder radius, m.
        half_length: half of the cylinder thickness, m.
        remanence_br: T.

    Returns:
        (B_rho, B_z) in T, broadcast over ``rho`` and ``z``.
    """
    r, zz = np.broadcast_arrays(np.asarray(rho, dtype=np.float64), np.asarray(z, dtype=np.float64))
    a, b = radius, half_length
    tolerance = RIM_TOLERANCE * max(a, b)
    on_rim = (np.abs(r - a) <= tolerance) & (np.minimum(np.abs(zz - b), np.abs(zz + b)) <= tolerance)
    if np.any(on_rim):
        msg = "the field is singular on the rim circles of the magnet"
        raise SingularFieldError(msg)

    b0 = remanence_br / math.pi
    gamma = (a - r) / (a + r)
    b_rho = np.zeros_like(r)
    b_z = np.zeros_like(r)
    for sign, xi in ((1.0, zz + b), (-1.0, zz - b)):
        s2 = xi**2 + (r + a) ** 2
        s = np.sqrt(s2)
        kc2 = (xi**2 + (a - r) ** 2) / s2
        b_rho += sign * (a / s) * _cel_radial(kc2)
        b_z += sign * (xi / s) * _cel_axial(kc2, gamma)
    b_rho = np.where(r == 0, 0.0, b0 * b_rho)
    b_z = b0 * a / (a + r) * b_z
    return np.asarray(b_rho, dtype=np.float64), np.asarray(b_z, dtype=np.float64)


def field_at(magnets: Iterable[CylMagnet], point: ArrayLike) -> NDArray[np.float64]:
    """Superposed flux density of ``magnets`` at ``point`` (or at every row of an (..., 3) array), T."""
    p = np.asarray(point, dtype=np.float64)
    total = np.zeros(p.shape, dtype=np.float64)
    for magnet in magnets:
        total = total + magnet.field(p)
    return total


def _loop_field(rho: float, zeta: float, a: float) -> tuple[float, float]:
    """Radial and axial field of a current loop of radius ``a`` per unit mu0 I."""
    if rho == 0:
        return 0.0, a**2 / (2 * (a**2 + zeta**2) ** 1.5)
    outer = (a + rho) ** 2 + zeta**2
    inner = (a - rho) ** 2 + zeta**2
    m = 4 * a * rho / outer
    k, e = special.ellipk(m), special.ellipe(m)
    scale = 1 / (2 * math.pi * math.sqrt(outer))
    b_z = scale * (k + (a**2 - rho**2 - zeta**2) / inner * e)
    b_rho = scale * zeta / rho * (-k + (a**2 + rho**2 + zeta**2) / inner * e)
    return float(b_rho), float(b_z)


def field_by_quadrature(magnet: CylMagnet, point: ArrayLike, epsrel: float = QUADRATURE_RTOL) -> NDArray[np.float64]:
    """Flux density at one point by numerical integration of the loop field over the equivalent sheet current."""
    z, rho, rho_hat = magnet.local_coordinates(np.asarray(point, dtype=np.float64))
    z_f, rho_f = float(z), float(rho)
    a, b = magnet.radius, magnet.half_length
    breaks = [z_f] if -b < z_f < b else None

    def component(index: int) -> float:
        value, _ = integrate.quad(
            lambda s: _loop_field(rho_f, z_f - s, a)[index], -b, b, epsabs=0.0, epsrel=epsrel, limit=500, points=breaks
        )
        return float(value) * magnet.remanence_br

    b_rho, b_z = component(0), component(1)
    return np.asarray(b_rho * rho_hat + b_z * np.asarray(magnet.axis), dtype=np.float64)


def dipole_field(magnet: CylMagnet, points: ArrayLike) -> NDArray[np.float64]:
    """Point-dipole approximation of the magnet field with moment Br V / mu0, T."""
    r = np.asarray(points, dtype=np.float64) - np.asarray(magnet.center)
    distance = np.linalg.norm(r, axis=-1, keepdims=True)
    r_hat = r / distance
    m = magnet.moment
    along = np.sum(r_hat * m, axis=-1, keepdims=True)
    return np.asarray(MU_0 / (4 * math.pi) * (3 * along * r_hat - m) / distance**3, dtype=np.float64)


def mount_magnet(remanence_br: float = SMCO_REMANENCE, center: ArrayLike = (0.0, 0.0, -1.6 * MM)) -> CylMagnet:
    """Samarium-cobalt mount magnet, 6.35 mm across and 3.2 mm thick, north face up."""
    return CylMagnet(6.35 * MM, 3.2 * MM, remanence_br).moved_to(center)


def external_magnet(remanence_br: float = NDFEB_REMANENCE, axis: ArrayLike = (-1.0, 0.0, 0.0)) -> CylMagnet:
    """Neodymium alignment magnet, 4 cm across and 3.6 cm thick, centred at the origin."""
    a = np.asarray(axis, dtype=np.float64)
    return CylMagnet(40 * MM, 36 * MM, remanence_br, axis=(a[0], a[1], a[2]))

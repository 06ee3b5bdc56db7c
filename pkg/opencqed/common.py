from __future__ import annotations

import math
from collections.abc import Iterable

import numpy as np
from numpy.typing import ArrayLike, NDArray

ATOL = 0.0000001

# Unit multipliers. Every frequency and rate is cyclic and stored in Hz.
KHZ = 1e3
MHZ = 1e6
GHZ = 1e9
THZ = 1e12

NM = 1e-9
UM = 1e-6
MM = 1e-3

US = 1e-6
MS = 1e-3

SIV_WAVELENGTH = 737e-9
GAP_REFRACTIVE_INDEX = 3.21
DEVICE_HEIGHT = 182.8e-9
DEFAULT_DIPOLE_TILT_DEG = 35.0

# Polar angle of a <111> axis measured from the (001) normal.
ANGLE_111_FROM_001_DEG = math.degrees(math.acos(1 / math.sqrt(3)))


def as_float_array(values: ArrayLike) -> NDArray[np.float64]:
    return np.atleast_1d(np.asarray(values, dtype=np.float64))


def substream(seed: int, index: int) -> np.random.Generator:
    """Returns an independent generator for sub-stream `index` of a seeded computation.

    The generator only depends on ``(seed, index)``, so partitioned work gives identical results regardless of how
    the partitions are scheduled.

    Args:
        seed: run seed.
        index: partition, point chunk or sequence index.

    Returns:
        A freshly seeded numpy generator.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def chunk_bounds(total: int, chunk_size: int) -> Iterable[tuple[int, int]]:
    for start in range(0, total, chunk_size):
        yield start, min(start + chunk_size, total)


def unit_vector(vector: ArrayLike) -> NDArray[np.float64]:
    v = np.asarray(vector, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm < ATOL:
        msg = "cannot normalize a zero vector"
        raise ValueError(msg)
    return v / norm


def is_unit_vector(vector: ArrayLike) -> bool:
    return abs(float(np.linalg.norm(np.asarray(vector, dtype=np.float64))) - 1.0) < ATOL

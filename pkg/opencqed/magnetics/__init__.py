from opencqed.magnetics.alignment import (
    AlphaMap,
    CrystalFrame,
    PlaneGrid,
    calibrate_mount_offset,
    calibrate_remanence,
    calibrated_mount,
    external_sweep,
    misalignment,
    polar_angle,
)
from opencqed.magnetics.cylinder import (
    NDFEB_REMANENCE,
    SMCO_REMANENCE,
    CylMagnet,
    cylinder_field_local,
    dipole_field,
    external_magnet,
    field_at,
    field_by_quadrature,
    mount_magnet,
)

__all__ = [
    "NDFEB_REMANENCE",
    "SMCO_REMANENCE",
    "AlphaMap",
    "CrystalFrame",
    "CylMagnet",
    "PlaneGrid",
    "calibrate_mount_offset",
    "calibrate_remanence",
    "calibrated_mount",
    "cylinder_field_local",
    "dipole_field",
    "external_magnet",
    "external_sweep",
    "field_at",
    "field_by_quadrature",
    "misalignment",
    "mount_magnet",
    "polar_angle",
]

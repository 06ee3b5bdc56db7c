from opencqed.core_model import CavityMode, CoupledSystem, EmitterParams, RateSet
from opencqed.scattering import DriveGrid, Geometry

__version__ = "0.1.0"

__all__ = ["CavityMode", "CoupledSystem", "DriveGrid", "EmitterParams", "Geometry", "RateSet", "__version__"]

# Re-export core modules
from .cache import SpectrumCache, cached
from .discretization import DiscretizationError, ModeOperator, RadialGrid
from .geometry import Geometry
from .spectral import SpectralBasis, SpectrumError, assemble_basis, from_modal, to_modal

__all__ = [
    "SpectrumCache",
    "cached",
    "DiscretizationError",
    "ModeOperator",
    "RadialGrid",
    "Geometry",
    "SpectralBasis",
    "SpectrumError",
    "assemble_basis",
    "from_modal",
    "to_modal",
]

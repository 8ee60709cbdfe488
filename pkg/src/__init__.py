"""
Degenwave - Spectral laboratory for a degenerate wave equation on the cylinder
"""

__version__ = "0.1.0"

# Expose core functionality at the top level
from .core.spectral import SpectralBasis, assemble_basis
from .models import ModelParams, RunConfig, validate_params

# Expose common utilities
from .utils.logging_config import get_logger

__all__ = [
    "ModelParams",
    "RunConfig",
    "SpectralBasis",
    "assemble_basis",
    "validate_params",
    "get_logger",
]

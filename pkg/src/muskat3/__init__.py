"""Boundary-integral solver for the two-interface (three-fluid) Muskat problem."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError, FieldEvaluationRefused, InterfaceCollision, InvertibilityFailure,
    MuskatError, RegionMismatch, WindowViolation,
)
from .grid import Grid  # noqa: E402
from .state import FluidParams, InterfaceState, VorticityDensity  # noqa: E402

__all__ = [
    "__version__", "Grid", "FluidParams", "InterfaceState", "VorticityDensity",
    "MuskatError", "WindowViolation", "InterfaceCollision", "InvertibilityFailure",
    "FieldEvaluationRefused", "RegionMismatch", "ConfigError",
]

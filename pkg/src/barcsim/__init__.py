"""Blind adaptive reduced-rank constrained CM receivers for DS-CDMA."""

from .errors import (
    BarcError,
    ConfigError,
    ConvergenceError,
    DegenerateConstraintError,
    SingularMatrixError,
    SingularUpdateError,
)

__version__ = "0.1.0"

__all__ = [
    "BarcError",
    "ConfigError",
    "ConvergenceError",
    "DegenerateConstraintError",
    "SingularMatrixError",
    "SingularUpdateError",
]

"""Exception types raised across the package."""


class BarcError(Exception):
    """Base class for numerical failures inside the receiver chain."""


class SingularMatrixError(BarcError):
    pass


class SingularUpdateError(BarcError):
    """Rank-one inverse update hit a (near) zero denominator."""


class ConvergenceError(BarcError):
    """Iterative eigen-extraction did not reach tolerance.

    The last iterate and its residual are kept on the exception so callers
    that can tolerate a rough answer (e.g. a tracking loop) may still use it.
    """

    def __init__(self, message, vector=None, residual=float("nan")):
        super().__init__(message)
        self.vector = vector
        self.residual = residual


class DegenerateConstraintError(BarcError):
    """Constraint vector collapsed to zero (broken signature or channel estimate)."""


class ConfigError(ValueError):
    """Invalid experiment configuration; ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path

"""
Exception hierarchy for the numerical core.

Input problems (bad configs, points outside the chart, infeasible marginals)
derive from LabInputError; solver and geometry failures derive from
LabNumericError. The CLI and the routers map the two families to different
exit codes / HTTP statuses.
"""

from typing import Optional


class LabError(Exception):
    """Base class for every error raised by app.lab."""


class LabInputError(LabError, ValueError):
    """The caller handed us something we cannot work with."""


class DomainError(LabInputError):
    """A point, ball or parameter lies outside the admissible domain."""


class WarpExpressionError(LabInputError):
    """A warp expression does not belong to the built-in grammar."""

    def __init__(self, message: str, expression: str, position: Optional[int] = None):
        self.expression = expression
        self.position = position
        if position is not None:
            message = f"{message} at position {position}: '{expression}'"
        else:
            message = f"{message}: '{expression}'"
        super().__init__(message)


class LabNumericError(LabError, ArithmeticError):
    """A numerical procedure failed to reach its tolerance."""

    def __init__(self, message: str, residual: Optional[float] = None):
        self.residual = residual
        if residual is not None:
            message = f"{message} (residual {residual:.3e})"
        super().__init__(message)


class ConjugatePointError(LabNumericError):
    """The Jacobi determinant vanished before the end of the geodesic."""

    def __init__(self, s: float):
        self.s = s
        super().__init__(f"Conjugate point detected at geodesic parameter s={s:.6f}")


class GeometryInconsistencyError(LabNumericError):
    """A transport Jacobian came out non-positive."""


class SingularMeasureError(LabError):
    """The measure has no density with respect to the volume measure (Ent = +inf)."""


class ConfigError(LabInputError):
    """An experiment config does not parse or does not validate."""

    def __init__(self, message: str, location: Optional[str] = None):
        self.location = location
        if location is not None:
            message = f"{location}: {message}"
        super().__init__(message)

"""Exception hierarchy shared by every module."""


class InfDepthError(Exception):
    """Base class for all library errors."""


class PreconditionError(InfDepthError, ValueError):
    """An argument violates a documented precondition."""


class DomainError(InfDepthError, ValueError):
    """A value lies outside the domain of a function."""


class NotPSDError(InfDepthError, ArithmeticError):
    """Matrix has a pivot below ``-pivot_tol``."""


class ConvergenceError(InfDepthError, ArithmeticError):
    """An iterative solver hit its iteration cap.

    The largest residual seen is kept on ``residual``.
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class UnsupportedError(InfDepthError, ValueError):
    """Requested combination is outside the supported regime."""

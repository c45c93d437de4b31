"""Exception types raised across the package."""


class MarineSegError(Exception):
    """Base class for all package errors."""


class InvalidInputError(MarineSegError, ValueError):
    pass


class BehindCameraError(MarineSegError, ValueError):
    """A point projects from behind the camera (non-positive depth)."""


class InsufficientDataError(MarineSegError, ValueError):
    pass


class CalibrationFailedError(MarineSegError, RuntimeError):
    pass


class NumericalDegeneracyError(MarineSegError, ArithmeticError):
    """A covariance stayed singular after eigenvalue flooring."""

    def __init__(self, message: str, component: int | None = None):
        super().__init__(message)
        self.component = component

"""Exception hierarchy.  Every error raised on purpose derives from MaxtevError."""


class MaxtevError(Exception):
    pass


class InvalidMediumError(MaxtevError, ValueError):
    pass


class UnsupportedProfileError(MaxtevError, ValueError):
    pass


class UnsupportedModeError(MaxtevError, ValueError):
    pass


class BoundaryZeroError(MaxtevError):
    """A zero of the integrand lies on (or numerically at) the contour."""

    def __init__(self, message, suggested_box=None):
        super().__init__(message)
        self.suggested_box = suggested_box


class ConvergenceError(MaxtevError, RuntimeError):
    pass


class IntegrationError(MaxtevError, RuntimeError):
    """The adaptive ODE integrator could not complete the requested span."""


class SingularSystemError(MaxtevError, ArithmeticError):
    """The shifted operator is numerically singular at the requested shift."""

    def __init__(self, message, z=None, condition=None):
        super().__init__(message)
        self.z = z
        self.condition = condition


class NoAdmissibleRayError(MaxtevError, ValueError):
    pass


class ResolutionError(MaxtevError, ValueError):
    """Grid too coarse for the requested semiclassical parameter."""


class ConfigError(MaxtevError, ValueError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field

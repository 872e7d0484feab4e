"""Exception types shared across the package."""


class PhotongunError(Exception):
    """Base class for all package errors."""


class ParameterError(PhotongunError):
    """A constructor or operation received an invalid parameter.

    Carries the name of the offending field so callers (and the CLI) can
    point at it.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class NumericalDomainError(PhotongunError):
    """A numerical routine was handed non-finite or out-of-domain data."""


class ConvergenceError(PhotongunError):
    """An iterative routine failed to converge; carries the last residual."""

    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (last residual {residual:.3e})")

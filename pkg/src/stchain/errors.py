"""Exception types shared across the package."""


class CapacityError(RuntimeError):
    """The requested object exceeds a hard size/memory cap."""


class ConvergenceError(RuntimeError):
    """An iterative solver failed to reach its residual target."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class SearchExhaustedError(RuntimeError):
    """A bounded search ended without finding the requested object."""


class EnsembleError(RuntimeError):
    """Too many samples of a disorder ensemble failed to solve."""

"""Exception types shared across the package."""


class SnnSelectError(Exception):
    """Base class for all package-specific errors."""


class EstimationError(SnnSelectError):
    """A numerical estimation step failed (singular design, empty tail, ...)."""


class DataError(SnnSelectError):
    """Input data could not be parsed or violates the declared schema."""

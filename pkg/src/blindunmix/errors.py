"""Exception types shared across the library."""


class UnmixError(Exception):
    """Base class for all errors raised by this package."""


class InvalidIndex(UnmixError):
    """A pixel index lies outside the valid range."""


class DuplicateIndex(UnmixError):
    """A pixel index occurs more than once where distinct indices are required."""


class FormatError(UnmixError):
    """A matrix file is malformed, truncated, or has inconsistent dimensions."""


class InvalidParameter(UnmixError):
    """A configuration or algorithm parameter is outside its valid range."""


class InvalidInput(UnmixError):
    """Input data violates a precondition (non-finite, empty, zero vector, ...)."""


class DimensionError(UnmixError):
    """Matrix dimensions are mutually inconsistent."""


class NumericalError(UnmixError):
    """A linear-algebra step failed even after the ridge fallback."""

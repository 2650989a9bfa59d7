"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`SharedRepError`, which is itself a ``ValueError`` so callers that
only care about bad input can catch the builtin.
"""


class SharedRepError(ValueError):
    """Base class for all package errors."""


class DimensionError(SharedRepError):
    """Array shapes or lengths are inconsistent."""


class ConfigurationError(SharedRepError):
    """A parameter or configuration value is outside its allowed range."""


class CovarianceError(SharedRepError):
    """A covariance matrix is not symmetric positive definite."""


class InsufficientDataError(SharedRepError):
    """A client does not hold enough samples for the requested operation."""


class OrthonormalityError(SharedRepError):
    """A basis matrix does not have orthonormal columns."""


class NumericError(SharedRepError):
    """Non-finite values encountered in data or intermediate results."""


class UnsupportedError(SharedRepError):
    """The requested computation is not available for this input family."""

"""Exception types shared across the package."""


class IdqError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(IdqError, ValueError):
    """Vector or matrix dimensions do not agree."""


class NonConvergence(IdqError, RuntimeError):
    """An iterative routine exhausted its iteration budget on pathological input."""


class UnsupportedModel(IdqError, TypeError):
    """The requested operation is not defined for this source model."""


class TauOutOfRange(IdqError, ValueError):
    """Water level outside (0, max component variance]."""


class DomainError(IdqError, ValueError):
    """Scalar argument outside the function's domain."""


class NumericalUnderflow(IdqError, FloatingPointError):
    """An entire conditional column underflowed to zero (slope too large for the grid)."""


class TooManyCodewords(IdqError, ValueError):
    """Requested codebook size exceeds the supported maximum."""


class AdmissibilityViolation(IdqError, ValueError):
    """Component similarity allocation cannot cover the target threshold."""

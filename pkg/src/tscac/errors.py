"""Exception types shared across the library."""


class TscacError(Exception):
    """Base class for library-specific errors."""


class ShapeError(TscacError, ValueError):
    """Array or vector dimensions do not match the declared contract."""


class InsufficientDataError(TscacError, ValueError):
    """An operation received fewer samples than it needs (empty batch, etc.)."""


class DataError(TscacError, ValueError):
    """Logged data violates a precondition, e.g. a zero behavior probability."""


class NumericError(TscacError, ArithmeticError):
    """A computation produced or received non-finite values."""


class DegenerateMultiplierError(TscacError, ValueError):
    """All constraint multipliers are zero where a positive sum is required."""


class DegenerateEvaluationError(TscacError, ValueError):
    """An estimator is undefined on the given data (zero weight, zero variance)."""


class ConfigError(TscacError, ValueError):
    """Configuration validation failure; message carries the field path."""

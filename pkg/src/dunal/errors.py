"""Exception types shared across the package."""


class DunalError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(DunalError):
    """Invalid configuration value or unparseable config file."""


class ShapeError(DunalError):
    """Array arguments with incompatible dimensions."""


class NumericError(DunalError):
    """Non-finite values or impossible numeric state (e.g. zero variance)."""


class UsageError(DunalError):
    """API called with inconsistent arguments (stale cache, empty pool, ...)."""


class TrainingError(DunalError):
    """Optimization produced a non-finite loss."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class DataError(DunalError):
    """Malformed input data file."""

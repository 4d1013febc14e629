"""Exception hierarchy shared across the package."""


class FracportError(Exception):
    """Base class for all package errors."""


class ConfigError(FracportError, ValueError):
    """Invalid parameter or configuration value."""


class DimensionError(FracportError, ValueError):
    """Array shapes do not agree."""


class DataError(FracportError):
    """Malformed or unusable return data."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class MissingDataError(DataError):
    """A missing-value sentinel or NaN was found."""


class NumericDomainError(FracportError, ArithmeticError):
    """A closed-form expression was evaluated outside its domain."""


class SolverError(FracportError, RuntimeError):
    """An iterative solver produced a non-finite iterate or cannot proceed."""


class SingularSystemError(SolverError):
    """A linear system is singular or numerically rank deficient."""

    def __init__(self, message, condition_number=None):
        if condition_number is not None:
            message = f"{message} (condition number {condition_number:.3e})"
        super().__init__(message)
        self.condition_number = condition_number

"""Exception hierarchy shared by every module of the package."""


class FpkError(Exception):
    """Base class for all package errors."""


class GridSizeError(FpkError, ValueError):
    pass


class NumericError(FpkError, ArithmeticError):
    """A non-finite value appeared where a finite one was required."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class DegenerateInputError(FpkError, ValueError):
    pass


class DomainError(FpkError, ValueError):
    pass


class UnsupportedInputError(FpkError, ValueError):
    pass


class NonIntegrableDriftError(FpkError, ValueError):
    pass


class ConvergenceError(FpkError, RuntimeError):
    pass


class SchemeViolationError(FpkError, RuntimeError):
    pass


class UnbalancedInputError(FpkError, ValueError):
    pass


class BracketError(FpkError, ValueError):
    pass


class AlphaRangeError(FpkError, ValueError):
    """Raised when alpha >= 1/4 is used without exploration mode."""


class ConfigError(FpkError, ValueError):
    pass

class BlindCommError(Exception):
    """Base class for package errors."""


class ConfigError(BlindCommError, ValueError):
    exit_code = 2


class DataError(BlindCommError, ValueError):
    exit_code = 3


class NumericalError(BlindCommError, ArithmeticError):
    exit_code = 4


class ConvergenceError(NumericalError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals

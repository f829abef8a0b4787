"""Exception types shared across the package.

The CLI maps each family to an exit code: configuration problems exit with 2,
bad input data with 3 and numerical failures with 4.
"""


class RedcutError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(RedcutError, ValueError):
    exit_code = 2


class DataError(RedcutError, ValueError):
    exit_code = 3


class NumericalError(RedcutError, ArithmeticError):
    exit_code = 4


class ConvergenceError(NumericalError):
    """Raised when the simplex QP solver runs out of iterations.

    The best feasible iterate found so far and its KKT residual are kept on
    the exception so callers can inspect or accept them.
    """

    def __init__(self, message, alpha=None, residual=None, iterations=None):
        super().__init__(message)
        self.alpha = alpha
        self.residual = residual
        self.iterations = iterations

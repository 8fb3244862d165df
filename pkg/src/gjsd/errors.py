"""Exception types shared across the package.

Two broad classes: bad caller input (shapes, ranges, unparseable files) and
numerical failures (non-PD covariances, unreached tolerances, diverged
optimizations). The CLI maps InputError to exit code 2 and NumericalError
to exit code 3.
"""


class GjsdError(Exception):
    """Base class for package errors."""


class InputError(GjsdError, ValueError):
    """Invalid argument: wrong shape, out-of-range value, or unparseable input."""


class NumericalError(GjsdError, ArithmeticError):
    """Numerical failure: singular matrix, non-finite value, unreached tolerance."""


class QuadratureError(NumericalError):
    """Adaptive quadrature hit the subdivision limit before reaching tolerance.

    Carries the best estimate achieved so far in `estimate`.
    """

    def __init__(self, message: str, estimate: float):
        super().__init__(message)
        self.estimate = estimate


class FitDivergedError(NumericalError):
    """Gradient-descent fit produced a non-finite loss. Carries the partial trace."""

    def __init__(self, message: str, trace):
        super().__init__(message)
        self.trace = trace


class TrainDivergedError(NumericalError):
    """Training produced a non-finite loss. Carries the partial record."""

    def __init__(self, message: str, record):
        super().__init__(message)
        self.record = record

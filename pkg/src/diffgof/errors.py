"""Exception hierarchy.

Validation problems (bad input, unsupported configuration) and numerical
failures (overflow, degenerate estimation) are kept apart so the command
line can map them onto different exit codes.
"""


class DiffgofError(Exception):
    """Base class for all package errors."""


class ValidationError(DiffgofError, ValueError):
    """Invalid parameters, specs, files or statistic/law pairings."""


class UnsupportedRegimeError(ValidationError):
    """The drift exponent gamma = 1/2 has no implemented limit theory."""


class NumericalError(DiffgofError, ArithmeticError):
    """A computation produced non-finite or degenerate values."""


class SimulationError(NumericalError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class EstimationError(NumericalError):
    pass

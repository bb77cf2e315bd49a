"""Exception hierarchy.

Validation problems subclass :class:`ValueError`; numerical failures subclass
:class:`NumericalError` so callers (and the CLI) can tell them apart.
"""


class CudlError(Exception):
    """Base class for all package errors."""


class DataValidationError(CudlError, ValueError):
    """Malformed input data (bad CSV cell, non-positive time, ...)."""


class InvalidParameterError(CudlError, ValueError):
    """A parameter is outside its admissible range."""


class InsufficientDataError(CudlError, ValueError):
    """Too few rows for the requested operation."""


class InvalidPredictionError(CudlError, ValueError):
    """Predictions outside the range required by a loss."""


class NumericalError(CudlError, ArithmeticError):
    """Base class for numerical failures."""


class PositivityError(NumericalError):
    """The censoring survival estimate is zero where it is divided by."""

    def __init__(self, index, value):
        self.index = index
        self.value = value
        super().__init__(
            f"positivity violated at observation {index}: G(T~) = {value!r}"
        )


class DegenerateConditioningError(NumericalError):
    """Conditioning on an event of probability zero under a survival curve."""


class DivergenceError(NumericalError):
    """Network training produced a non-finite loss."""

    def __init__(self, epoch, batch, value):
        self.epoch = epoch
        self.batch = batch
        super().__init__(
            f"training diverged at epoch {epoch}, batch {batch} (loss={value!r})"
        )


class ConvergenceError(NumericalError):
    """Newton-Raphson did not converge."""


class SeparationError(NumericalError):
    """Monotone likelihood: coefficients diverge."""


class DegenerateFoldError(NumericalError):
    """A cross-validation fold has no uncensored rows."""

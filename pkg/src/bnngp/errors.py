"""Exception types shared across the package.

The split matters for the CLI exit codes: usage problems exit 1, numerical
failures exit 2, IO failures exit 3.
"""


class BnngpError(Exception):
    """Base class for all package errors."""


class UsageError(BnngpError):
    """Bad arguments, shapes, or configuration supplied by the caller."""


class InvalidInputError(UsageError):
    """Non-finite or otherwise ill-formed numerical input."""


class DomainError(UsageError):
    """Scalar argument outside the mathematical domain of a function."""


class ArchitectureError(UsageError):
    """Layer structure that violates the architecture contract."""


class NumericalError(BnngpError):
    """A numerically meaningful operation could not be completed."""


class DegenerateKernelError(NumericalError):
    """Kernel matrix is singular beyond what the jitter policy can absorb."""


class NotInImageError(NumericalError):
    """Value lies outside the image of the map being inverted."""


class NotInvertibleError(NumericalError):
    """The requested inverse map does not exist in this parameter regime."""


class PhaseBoundaryError(NumericalError):
    """Quantity is undefined exactly at the phase boundary v_w = 1."""


class UndefinedCorrelationError(NumericalError):
    """Sample correlation requested for a zero-variance sequence."""


class OptimizationDivergedError(NumericalError):
    """Hyperparameter optimization produced a non-finite objective."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []


class CsvParseError(UsageError):
    """Malformed CSV input; carries the 1-based line number."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number

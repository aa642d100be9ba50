"""Exception types shared across the package.

The CLI maps each family to a process exit code, so new errors should
subclass one of these rather than raising bare ``RuntimeError``.
"""


class QcaError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ParameterError(QcaError, ValueError):
    """A parameter lies outside its allowed domain."""

    exit_code = 1

    def __init__(self, field, value, reason="out of range"):
        self.field = field
        self.value = value
        super().__init__(f"{field}={value!r}: {reason}")


class CapacityError(QcaError):
    """The requested system size exceeds what a dense backend can hold."""

    exit_code = 2


class NumericalError(QcaError, ArithmeticError):
    exit_code = 3


class DegenerateStateError(NumericalError):
    """Normalisation of a state is impossible (vanishing trace)."""


class EstimationError(QcaError):
    """Not enough usable data to produce an estimate."""

    exit_code = 3


class DataIOError(QcaError, OSError):
    """A file could not be read, parsed or written."""

    exit_code = 4

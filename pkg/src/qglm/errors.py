"""Exception hierarchy shared by the simulator, data pipeline and CLI."""


class QGLMError(Exception):
    """Base class for all package errors."""


class ParameterError(QGLMError, ValueError):
    """Invalid dimensions, parameters or argument combinations."""


class DegenerateStateError(QGLMError, ValueError):
    """A state (or input) has no usable magnitude or spread."""


class ContractError(QGLMError, ValueError):
    """An operation was called on an input violating its precondition."""


class EncodingError(QGLMError, ValueError):
    """A feature value cannot be encoded without severe truncation loss."""


class TruncationOverflowError(QGLMError, ArithmeticError):
    """The circuit pushed the state out of the truncated Fock space."""


class TrainingAbortedError(TruncationOverflowError):
    """Truncation overflow during training; carries the failing iteration."""

    def __init__(self, iteration, message):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration


class DataError(QGLMError, ValueError):
    """Malformed input file or dataset."""


class IngestionError(DataError):
    """A raw CSV could not be parsed; names the offending row and column."""

    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.row = row
        self.column = column


class ConvergenceError(QGLMError, ArithmeticError):
    """An iterative fit did not converge; ``last`` holds the final iterate."""

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class SingularDesignError(QGLMError, ArithmeticError):
    """The design matrix is rank deficient."""


class UsageError(QGLMError, ValueError):
    """Bad command-line or config-file input."""

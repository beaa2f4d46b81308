"""Exception hierarchy shared by every module of the package."""


class CrpError(Exception):
    """Base class for all package errors."""


class DimensionError(CrpError, ValueError):
    """Array shapes are not conformable."""


class PreconditionError(CrpError, ValueError):
    """An input violates a documented precondition."""


class ConfigError(CrpError, ValueError):
    """Experiment configuration could not be parsed or validated."""


class DataError(CrpError):
    """Problems with the data itself (files, counts, labels)."""


class ParseError(DataError, ValueError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class EmptyDatasetError(DataError, ValueError):
    pass


class EmptyClassError(DataError, ValueError):
    pass


class InsufficientSamplesError(DataError, ValueError):
    pass


class NumericalError(CrpError, ArithmeticError):
    """Base class for failures of the numerical routines."""


class SingularityError(NumericalError):
    """A matrix that must be positive definite could not be factorized."""


class IllPosedError(NumericalError):
    pass


class DegenerateDirectionError(NumericalError):
    pass


class NumericalFailureError(NumericalError):
    pass


class TrialError(CrpError):
    """A protocol trial failed; ``trial`` names it and ``__cause__`` holds the reason."""

    def __init__(self, trial, cause, label=None):
        self.trial = trial
        self.cause = cause
        prefix = f"trial {trial}"
        if label:
            prefix += f" ({label})"
        super().__init__(f"{prefix} failed: {type(cause).__name__}: {cause}")

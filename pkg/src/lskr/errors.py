"""Exception hierarchy shared by every lskr module.

Each error category carries the process exit code the CLI maps it to:
2 for configuration/validation problems, 3 for data problems, 4 for
numeric or infeasibility failures.
"""


class LskrError(Exception):
    """Base class for all lskr errors."""

    exit_code = 1


class ConfigError(LskrError):
    """Malformed config file or invalid CLI arguments."""

    exit_code = 2


class ValidationError(LskrError):
    """A precondition on function inputs was violated."""

    exit_code = 2


class InvalidBandwidthError(ValidationError):
    """Bandwidth entries must be strictly positive and finite."""


class ShapeError(ValidationError):
    """Array dimensions disagree."""


class DataError(LskrError):
    """Input data cannot support the requested operation."""

    exit_code = 3


class EmptyInputError(DataError):
    """An operation received an empty sample or vector."""


class DegenerateInputError(DataError):
    """Zero-spread axis or otherwise degenerate input."""


class InsufficientDataError(DataError):
    """Too few valid rows remain after cleaning."""


class NoOverlapError(DataError):
    """Source and target date ranges do not overlap."""


class NumericError(LskrError):
    """Non-finite values or a failed numeric step."""

    exit_code = 4


class EmptyWindowError(NumericError):
    """No observation carries positive kernel weight at the query.

    ``component`` names the failing stage when the error surfaces from a
    composite estimator ("source" or "bias").
    """

    def __init__(self, message: str, component: str | None = None):
        super().__init__(message)
        self.component = component


class SelectionFailureError(NumericError):
    """Every cross-validation candidate was unscoreable."""


class TransferInfeasibleError(NumericError):
    """The source fit is empty at too many target observations."""


class SweepError(NumericError):
    """Too many replications of a simulation sweep failed."""


class NoDataError(NumericError):
    """Every grid cell of a surface evaluation was missing."""

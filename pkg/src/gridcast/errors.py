"""Exception hierarchy shared across the package."""


class GridcastError(Exception):
    """Base class for all errors raised by this package."""


class IngestError(GridcastError):
    """Raised when a CSV row cannot be parsed or violates the input contract."""


class WrangleError(GridcastError):
    """Raised when a raw series cannot be turned into a clean 15-minute grid."""


class SplitError(GridcastError):
    """Raised when a requested year split cannot be cut from a series."""


class ShapeError(GridcastError):
    """Raised on a shape mismatch in the tensor engine, naming the offending node."""


class TrainingDiverged(GridcastError):
    """Raised when the training loss becomes non-finite.

    Carries the last epoch that completed with a finite loss.
    """

    def __init__(self, message: str, last_finite_epoch: int):
        super().__init__(message)
        self.last_finite_epoch = last_finite_epoch


class ConfigError(GridcastError):
    """Raised on invalid experiment configuration files or values."""

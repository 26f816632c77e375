"""Exception hierarchy shared by every ordac module."""


class OrdacError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(OrdacError, ValueError):
    pass


class DimensionError(OrdacError, ValueError):
    pass


class DataError(OrdacError, ValueError):
    pass


class TrainingDivergedError(OrdacError, RuntimeError):
    """Raised when the training loss stops being finite."""

    def __init__(self, epoch, batch, loss=float("nan")):
        self.epoch = epoch
        self.batch = batch
        self.loss = loss
        super().__init__(f"training diverged at epoch {epoch}, batch {batch} (loss={loss})")

"""Exception hierarchy shared by the library and the CLI.

Every domain error is a ``click.ClickException`` so commands can let it
propagate and click prints the message with the right exit status. They are
also ``ValueError`` subclasses for library callers.
"""
import click

EXIT_DATA_ERROR = 3
EXIT_TRAINING_DIVERGED = 4


class AquiferError(click.ClickException, ValueError):
    exit_code = EXIT_DATA_ERROR

    def __init__(self, message: str):
        click.ClickException.__init__(self, message)


class FormatError(AquiferError):
    """A file does not follow its declared container format."""


class SizeMismatchError(FormatError):
    """Declared dimensions disagree with the payload size."""


class DataError(AquiferError):
    """Sample values are non-finite or out of range."""


class ValidationError(AquiferError):
    """Annotations, masks or palettes violate their invariants."""


class ConfigurationError(AquiferError):
    pass


class ShapeError(AquiferError):
    pass


class DegenerateLabelsError(AquiferError):
    """Only one class is present where both are required."""


class CongestionError(AquiferError):
    """Synthetic buildings could not be placed without overlap."""


class TrainingDivergedError(AquiferError):
    exit_code = EXIT_TRAINING_DIVERGED

    def __init__(self, epoch: int, loss: float):
        super().__init__(f"Training diverged at epoch {epoch}: loss became {loss}.")
        self.epoch = epoch
        self.loss = loss

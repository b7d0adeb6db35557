"""Exception hierarchy; each family maps to one CLI exit code."""


class ToolkitError(RuntimeError):
    exit_code = 2


class ConfigError(ToolkitError):
    """Bad command line or experiment configuration."""
    exit_code = 1


class DataError(ToolkitError, ValueError):
    """Malformed or inconsistent input data."""
    exit_code = 2


class NumericalError(ToolkitError):
    exit_code = 3


class TrainingDivergedError(NumericalError):
    """Raised when the training loss stops being finite.

    `epoch_log` holds the records of every completed epoch so the caller
    can still persist them.
    """

    def __init__(self, message, epoch_log=None):
        super().__init__(message)
        self.epoch_log = list(epoch_log or [])

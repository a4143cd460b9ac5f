"""
Error hierarchy shared by every app.

Each class carries the process exit code the CLI reports for it.
"""


class DreamlightError(Exception):
    exit_code = 1


class DimensionError(DreamlightError, ValueError):
    """Shapes or dimensions of the inputs do not agree."""

    exit_code = 2


class ParameterError(DreamlightError, ValueError):
    """A parameter is outside its valid range (sigma <= 0, empty batch, ...)."""

    exit_code = 2


class ConfigurationError(DreamlightError):
    """Bad command-line arguments or run configuration."""

    exit_code = 2


class StateError(DreamlightError):
    """Required state is missing: checkpoint, dataset, trained parameters."""

    exit_code = 3


class DatasetIOError(DreamlightError, OSError):
    """A file or directory could not be read or written."""

    exit_code = 4

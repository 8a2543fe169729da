"""Exception hierarchy; the CLI maps each class to its own exit code."""


class CellValError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(CellValError, ValueError):
    """Invalid run configuration (unknown key, out-of-range value)."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class DataError(CellValError, ValueError):
    """Malformed or inconsistent input data."""


class ComputeError(CellValError, RuntimeError):
    """A computation could not be carried out on otherwise valid input."""

"""Exception hierarchy shared by the library and the command line."""


class HrolfError(Exception):
    """Base class for all errors raised by hrolf."""

    exit_code = 1


class ConfigError(HrolfError, ValueError):
    """Invalid configuration or parameter value."""

    exit_code = 2


class ShapeError(HrolfError, ValueError):
    """Tensor or light-field shapes are incompatible."""

    exit_code = 2


class RangeError(HrolfError, IndexError):
    """An index, crop window or view selection falls outside the data."""

    exit_code = 2


class FormatError(HrolfError, ValueError):
    """A file on disk does not follow the expected layout."""

    exit_code = 3


class ComputeError(HrolfError, RuntimeError):
    """A numerical computation failed (non-finite values, divergence)."""

    exit_code = 4

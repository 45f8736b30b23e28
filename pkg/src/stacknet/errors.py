"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: ConfigError -> 1,
DataError -> 2, NumericError -> 3.
"""


class StacknetError(Exception):
    """Base class for all stacknet errors."""


class ConfigError(StacknetError):
    """Bad configuration: unknown keys, wrong types, out-of-range values."""


class DataError(StacknetError):
    """Bad data or shapes: parse failures, dimension mismatches, invalid labels."""


class NumericError(StacknetError):
    """Numeric failure during training: non-finite loss or gradients."""

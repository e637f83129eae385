"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3.
Solver non-convergence is reported via OptimizeReport.converged, not an
exception, so partial results can still be written.
"""


class RadioSlamError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(RadioSlamError):
    """Invalid configuration value or unusable parameter combination."""


class DataError(RadioSlamError):
    """Malformed or inconsistent input data (files, scan streams, node sets)."""

"""Exception types shared across the pipeline.

The CLI maps these onto exit codes: ConfigError -> 2,
DataValidationError -> 3, StageError (and anything else raised
mid-stage) -> 4.
"""


class ConfigError(ValueError):
    """Bad or missing configuration (paths, thresholds, flags)."""


class DataValidationError(ValueError):
    """Input data violates the documented schema or an invariant."""


class StageError(RuntimeError):
    """A pipeline stage cannot run, e.g. a prior stage's artifact is missing."""

"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations


class TransitModelError(ValueError):
    """Base class for all errors raised by this package."""


class SchemaError(TransitModelError):
    """A column, variable or coefficient name does not resolve."""


class DegenerateDataError(TransitModelError):
    """No usable rows remain, or a variance needed for a statistic is zero."""


class InsufficientDataError(TransitModelError):
    """Fewer observations than the estimator needs."""


class CollinearityError(TransitModelError):
    """The design matrix is numerically rank deficient."""

    def __init__(self, message: str, column: str | int | None = None) -> None:
        super().__init__(message)
        self.column = column


class InvalidInferenceError(TransitModelError):
    """A t-test was requested with a nonpositive standard error."""


class ShapeError(TransitModelError):
    """Array arguments have incompatible lengths."""


class ConfigError(TransitModelError):
    """A configuration value is outside its allowed range."""


class StageError(TransitModelError):
    """Wraps a failure inside one stage of the two-stage pipeline."""

    def __init__(self, stage: str, cause: Exception) -> None:
        super().__init__(f"{stage} stage failed: {cause}")
        self.stage = stage
        self.cause = cause

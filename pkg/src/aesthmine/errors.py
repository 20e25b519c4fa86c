"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericError -> 4. Plain ValueError is used for programmer-facing argument
contract violations (dimension mismatches, bad parameter values).
"""


class AesthmineError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(AesthmineError):
    """Invalid or inconsistent configuration."""


class DataError(AesthmineError):
    """Problem with user-supplied data."""


class CorpusFormatError(DataError):
    """A corpus file could not be parsed. Carries the offending line number."""

    def __init__(self, message: str, line_number: int | None = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class DuplicateImageIdError(DataError):
    """Two records in one corpus share an image_id."""


class QueryError(DataError):
    """A retrieval query referenced an unknown attribute or semantic label."""


class LabelingError(DataError):
    """Binarization left fewer than two classes for training."""


class NumericError(AesthmineError):
    """A numeric procedure failed (non-convergence, undefined statistic)."""


class UndefinedCorrelationError(NumericError):
    """Rank correlation is undefined (too few points or zero rank variance)."""


class DegenerateDistributionError(NumericError):
    """A score histogram has no spread, so no continuous family fits it."""


class UntrainableAttributeError(DataError):
    """An attribute has no usable positives in the train or validation split."""


class PipelineStageError(AesthmineError):
    """A pipeline stage failed. Wraps the causing error."""

    def __init__(self, stage: str, artifact: str, cause: Exception):
        self.stage = stage
        self.artifact = artifact
        self.cause = cause
        super().__init__(f"stage '{stage}' failed (artifact {artifact}): {cause}")

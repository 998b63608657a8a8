"""Exception types shared across the toolkit."""


class OpenMaxError(Exception):
    """Base class for all toolkit errors."""


class FormatError(OpenMaxError):
    """Serialized file has a bad magic, version, header, or structure."""


class DimensionError(OpenMaxError):
    """Declared dimensions disagree with the actual payload."""


class DataError(OpenMaxError):
    """Values violate the data contract (non-finite, label out of range)."""


class IoError(OpenMaxError):
    """Path could not be read or written."""


class ArityError(OpenMaxError):
    """Sequence lengths disagree with what an operation requires."""


class DegenerateTailError(OpenMaxError):
    """Tail values have zero spread, so no Weibull fit exists."""


class SolverError(OpenMaxError):
    """Iterative parameter estimation failed to converge."""


class EmptyClassError(OpenMaxError):
    """A per-class operation received no samples."""


class ZeroVectorError(OpenMaxError):
    """Cosine-based distance requested for a zero vector."""


class CalibrationError(OpenMaxError):
    """Calibration retained no class at all."""


class ModelCoverageError(OpenMaxError):
    """Scoring needs a class model that calibration did not produce."""


class EmptyDatasetError(OpenMaxError):
    """Evaluation received an empty dataset partition."""


class ConfigError(OpenMaxError):
    """Configuration values are out of range or inconsistent."""

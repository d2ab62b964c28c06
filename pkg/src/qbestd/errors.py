"""Exception types shared across the package."""


class QbestdError(Exception):
    """Base class for all qbestd errors."""


class UnsupportedFormatError(QbestdError):
    """File parsed cleanly but uses an encoding this package does not handle."""


class CorruptFileError(QbestdError):
    """File violates its own container format (bad magic, truncated chunk, ...)."""


class ConfigError(QbestdError):
    """Configuration is inconsistent with the data it is applied to."""


class ShapeError(QbestdError):
    """Operands disagree in dimensionality."""


class AudioTooShortError(QbestdError):
    """Audio signal shorter than a single analysis frame."""


class EvaluationError(QbestdError):
    """Retrieval evaluation is undefined for the given inputs."""


class DegenerateVarianceError(EvaluationError):
    """Paired differences have zero spread around a nonzero mean."""

"""Exception hierarchy shared across the package."""


class RegadaError(Exception):
    """Base class for all package errors."""


class ShapeError(RegadaError, ValueError):
    """Operand shapes are incompatible."""


class BatchSizeError(RegadaError, ValueError):
    """Batch too small for a train-mode statistic."""


class ConfigError(RegadaError, ValueError):
    """Invalid configuration value."""


class FormatError(RegadaError, ValueError):
    """Malformed binary or JSON file."""


class ValidationError(RegadaError, ValueError):
    """Data cross-references fail validation."""

    def __init__(self, message, offenders=()):
        super().__init__(message)
        self.offenders = list(offenders)


class InfeasibleSplitError(RegadaError, ValueError):
    """No composition split satisfies the coverage constraints."""

    def __init__(self, message, labels=()):
        super().__init__(message)
        self.labels = list(labels)


class TrainingError(RegadaError, RuntimeError):
    """Training aborted (e.g. non-finite loss)."""

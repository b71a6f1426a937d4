"""Residually-gated adverb-action composition for video-adverb retrieval."""
from .config import TrainConfig, resolve_config
from .errors import (
    BatchSizeError,
    ConfigError,
    FormatError,
    InfeasibleSplitError,
    RegadaError,
    ShapeError,
    TrainingError,
    ValidationError,
)

__version__ = "0.1.0"

__all__ = [
    "BatchSizeError",
    "ConfigError",
    "FormatError",
    "InfeasibleSplitError",
    "RegadaError",
    "ShapeError",
    "TrainConfig",
    "TrainingError",
    "ValidationError",
    "resolve_config",
    "__version__",
]

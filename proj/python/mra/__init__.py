"""Multi-resolution approximation of Gaussian process likelihoods and predictions."""

from ._core import (
    ConfigError,
    Error,
    FormatError,
    IoError,
    NumericalError,
    StructuralError,
    TransportError,
    default_levels,
    estimate_memory_gib,
    knot_count,
    loglik,
    predict,
    run_config,
)

__all__ = [
    "ConfigError",
    "Error",
    "FormatError",
    "IoError",
    "NumericalError",
    "StructuralError",
    "TransportError",
    "default_levels",
    "estimate_memory_gib",
    "knot_count",
    "loglik",
    "predict",
    "run_config",
]

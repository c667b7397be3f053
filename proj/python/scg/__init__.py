"""Spatiotemporal graph convolution for time-aware QoS prediction."""

from ._scg import (
    ConfigError,
    DataError,
    DimensionError,
    DivergenceError,
    Error,
    FitResult,
    Model,
    QosTensor,
    TrainConfig,
    ablate,
    evaluate,
    facewise_product,
    fit,
    generate_synthetic,
    load_dataset,
    metrics_json,
    mixing_matrix,
    normalize_values,
    save_dataset,
    split,
    theta_product,
    theta_transform,
)

__all__ = [name for name in dir() if not name.startswith("_")]

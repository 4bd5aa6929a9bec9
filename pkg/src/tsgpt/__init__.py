"""Decoder-only retention network for time series, from tensors to CLI."""

from . import bench, cli, convolution, datagen, metrics, model, positional, retention, tensor, training
from .errors import (
    CheckpointError,
    ConfigError,
    ContractError,
    DataError,
    InputError,
    ShapeError,
    StateError,
    TaskError,
    TrainingError,
    TsgptError,
    UsageError,
)
from .model import Model, ModelConfig
from .tensor import Rng, Tensor, backward

__all__ = [
    "CheckpointError",
    "ConfigError",
    "ContractError",
    "DataError",
    "InputError",
    "Model",
    "ModelConfig",
    "Rng",
    "ShapeError",
    "StateError",
    "TaskError",
    "Tensor",
    "TrainingError",
    "TsgptError",
    "UsageError",
    "backward",
    "bench",
    "cli",
    "convolution",
    "datagen",
    "metrics",
    "model",
    "positional",
    "retention",
    "tensor",
    "training",
]

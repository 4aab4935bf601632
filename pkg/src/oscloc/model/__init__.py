"""Temporal transformer frame classifier: network, training loop, checkpoints."""

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .network import (
    ModelConfig,
    backward,
    forward,
    infer,
    init_params,
    masked_cross_entropy,
    positional_encoding,
)
from .training import TrainConfig, TrainingDiverged, train

__all__ = [
    "CheckpointError",
    "ModelConfig",
    "TrainConfig",
    "TrainingDiverged",
    "backward",
    "forward",
    "infer",
    "init_params",
    "load_checkpoint",
    "masked_cross_entropy",
    "positional_encoding",
    "save_checkpoint",
    "train",
]

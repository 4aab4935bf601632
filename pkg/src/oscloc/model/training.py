"""Mini-batch training loop with a decoupled-weight-decay Adam optimizer."""

from __future__ import annotations

from dataclasses import dataclass
from math import isfinite

import numpy as np

from ..core import StateLabel, StateVocabulary, as_label_array
from .network import ModelConfig, backward, forward, init_params, masked_cross_entropy

__all__ = [
    "TrainConfig",
    "TrainingDiverged",
    "AdamW",
    "targets_from_labels",
    "train",
]


class TrainingDiverged(RuntimeError):
    """Raised when the loss stops being finite."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 8
    lr: float = 1e-3
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")


class AdamW:
    """Adam with bias correction and decoupled weight decay.

    Decay applies only to matrices; biases and layer-norm parameters are
    left undecayed.
    """

    def __init__(self, params: dict[str, np.ndarray], config: TrainConfig):
        self.config = config
        self.step_count = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray],
             grads: dict[str, np.ndarray]) -> None:
        c = self.config
        self.step_count += 1
        bc1 = 1.0 - c.beta1 ** self.step_count
        bc2 = 1.0 - c.beta2 ** self.step_count
        for name, p in params.items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * g * g
            update = (m / bc1) / (np.sqrt(v / bc2) + c.eps)
            if p.ndim >= 2:
                update = update + c.weight_decay * p
            p -= c.lr * update


def targets_from_labels(labels, vocabulary: StateVocabulary,
                        transition: str | None = None,
                        obj: str | None = None) -> np.ndarray:
    """Map a pseudo-label sequence to classifier target indices.

    Ambiguous frames become -1, the loss's exclusion marker. The transition
    (and, for a per-object vocabulary, the object) names which block of the
    label space the video's states fall in.
    """
    labels = as_label_array(labels)
    out = np.empty(labels.shape[0], dtype=np.int64)
    lut = {int(StateLabel.AMBIGUOUS): -1, int(StateLabel.BACKGROUND): 0}
    for code in np.unique(labels):
        code = int(code)
        if code not in lut:
            lut[code] = vocabulary.class_index(StateLabel(code), transition, obj)
    for code, target in lut.items():
        out[labels == code] = target
    return out


def _pad_batch(videos, input_dim):
    lengths = [v[0].shape[0] for v in videos]
    t_max = max(lengths)
    x = np.zeros((len(videos), t_max, input_dim), dtype=np.float64)
    targets = np.full((len(videos), t_max), -1, dtype=np.int64)
    mask = np.zeros((len(videos), t_max), dtype=bool)
    for row, (feats, tgt) in enumerate(videos):
        t = feats.shape[0]
        x[row, :t] = feats
        targets[row, :t] = tgt
        mask[row, :t] = True
    return x, targets, mask


def train(model_config: ModelConfig, train_config: TrainConfig,
          videos: list[tuple[np.ndarray, np.ndarray]],
          params: dict[str, np.ndarray] | None = None,
          on_epoch=None):
    """Fit the classifier on (features, targets) pairs of varying length.

    Videos are shuffled every epoch with a seeded generator and padded per
    batch. Returns (params, history) where history holds one entry per epoch
    with the frame-weighted mean loss. Raises TrainingDiverged when the loss
    leaves the finite range.
    """
    if not videos:
        raise ValueError("no training videos")
    prepared = []
    for feats, tgt in videos:
        feats = np.asarray(feats, dtype=np.float64)
        tgt = np.asarray(tgt, dtype=np.int64)
        if feats.ndim != 2 or feats.shape[1] != model_config.input_dim:
            raise ValueError("feature dimension does not match the model")
        if tgt.shape != (feats.shape[0],):
            raise ValueError("targets and features disagree on frame count")
        if tgt.max() >= model_config.num_classes:
            raise ValueError("target class out of range")
        prepared.append((feats, tgt))

    if params is None:
        params = init_params(model_config, train_config.seed)
    optimizer = AdamW(params, train_config)
    rng = np.random.default_rng(train_config.seed)
    history = []

    for epoch in range(train_config.epochs):
        order = rng.permutation(len(prepared))
        loss_sum, frame_count = 0.0, 0
        for start in range(0, len(order), train_config.batch_size):
            batch = [prepared[i] for i in order[start:start + train_config.batch_size]]
            x, targets, mask = _pad_batch(batch, model_config.input_dim)
            logits, cache = forward(params, model_config, x, mask)
            loss, dlogits = masked_cross_entropy(logits, targets, mask)
            if not isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss {loss} in epoch {epoch}")
            n = int(((targets >= 0) & mask).sum())
            if n:
                loss_sum += loss * n
                frame_count += n
                grads = backward(params, model_config, cache, dlogits)
                optimizer.step(params, grads)
        entry = {
            "epoch": epoch,
            "loss": loss_sum / frame_count if frame_count else 0.0,
            "frames": frame_count,
        }
        history.append(entry)
        if on_epoch is not None:
            on_epoch(entry)
    return params, history

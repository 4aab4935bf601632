"""Turning per-frame class scores into ordered state sequences.

All decoders consume a frame-score matrix whose column 0 is background.
The four-column layout (background, initial, transitioning, end) is the
common case; wider heads are first restricted to four columns for the
transition (and object) in play.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .core import (
    STATES_IN_ORDER,
    StateLabel,
    StateVocabulary,
    VocabularyMode,
    as_label_array,
)

__all__ = [
    "argmax_decode",
    "ordered_decode",
    "path_score",
    "top1_frames",
    "restrict_scores",
    "hierarchical_decode",
]


def _as_frame_scores(frame_scores, width: int = 4) -> np.ndarray:
    arr = np.asarray(frame_scores, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] != width:
        raise ValueError(
            f"expected a T x {width} frame-score matrix, got shape {arr.shape}"
        )
    if not np.isfinite(arr).all():
        raise ValueError("frame scores must be finite")
    return arr


def argmax_decode(frame_scores, vocabulary: StateVocabulary | None = None) -> np.ndarray:
    """Per-frame argmax, ignoring temporal structure. Ties take the lower
    class index. With a vocabulary the winning class is mapped to its state,
    so the output is always background/initial/transitioning/end codes."""
    if vocabulary is None:
        arr = _as_frame_scores(frame_scores)
        return np.argmax(arr, axis=1).astype(np.int8)
    arr = _as_frame_scores(frame_scores, vocabulary.num_classes)
    classes = np.argmax(arr, axis=1)
    lut = np.array([int(vocabulary.state_of_class(c))
                    for c in range(vocabulary.num_classes)], dtype=np.int8)
    return lut[classes]


def ordered_decode(frame_scores) -> np.ndarray:
    """Highest-scoring label sequence whose state frames appear in
    initial -> transitioning -> end order (background allowed anywhere).

    A frame inside a stage counts the larger of its background score and the
    stage's state score; ties keep the frame background.
    """
    return kernels.ordered_decode_path(_as_frame_scores(frame_scores))


def path_score(frame_scores, labels) -> float:
    """Objective value of a label sequence: the sum of each frame's score in
    its assigned column."""
    arr = _as_frame_scores(frame_scores)
    labels = as_label_array(labels)
    if labels.shape[0] != arr.shape[0]:
        raise ValueError("labels and frame scores disagree on frame count")
    if (labels == StateLabel.AMBIGUOUS).any():
        raise ValueError("ambiguous frames have no score column")
    return float(arr[np.arange(arr.shape[0]), labels].sum())


def top1_frames(frame_scores,
                states=STATES_IN_ORDER) -> dict[StateLabel, int]:
    """Highest-scoring frame per state (earliest frame on ties)."""
    arr = _as_frame_scores(frame_scores)
    return {s: int(np.argmax(arr[:, int(s)])) for s in states}


def restrict_scores(frame_scores, vocabulary: StateVocabulary,
                    transition: str, obj: str | None = None) -> np.ndarray:
    """Cut a full-head score matrix down to four columns for one transition.

    Shared mode passes through. Multi-task mode picks the transition's three
    state columns. Per-object mode picks the object's columns when the object
    is given; without one (a novel object at test time) each state column is
    the maximum over the transition's known objects.
    """
    if vocabulary.mode is VocabularyMode.SHARED:
        return _as_frame_scores(frame_scores)
    arr = _as_frame_scores(frame_scores, vocabulary.num_classes)
    out = np.empty((arr.shape[0], 4), dtype=np.float64)
    out[:, 0] = arr[:, 0]
    if vocabulary.mode is VocabularyMode.MULTI_TASK or obj is not None:
        cols = vocabulary.state_class_indices(transition, obj)
        out[:, 1:] = arr[:, cols]
        return out
    groups = [vocabulary.state_class_indices(transition, o)
              for o in vocabulary.known_objects[transition]]
    for s in range(3):
        out[:, 1 + s] = arr[:, [g[s] for g in groups]].max(axis=1)
    return out


def hierarchical_decode(frame_scores,
                        vocabulary: StateVocabulary) -> tuple[str, np.ndarray]:
    """Two-stage decoding for a multi-task head.

    Stage one scores each transition by summing, over frames, the maximum of
    its three state columns, and keeps the best (ties take the
    lexicographically first transition). Stage two runs the ordered decoder
    on that transition's four-column restriction.
    """
    if vocabulary.mode is not VocabularyMode.MULTI_TASK:
        raise ValueError("hierarchical decoding needs a multi-task vocabulary")
    arr = _as_frame_scores(frame_scores, vocabulary.num_classes)
    best_name, best_total = None, -np.inf
    for name in vocabulary.transitions:
        cols = vocabulary.state_class_indices(name)
        total = float(arr[:, cols].max(axis=1).sum())
        if total > best_total:
            best_name, best_total = name, total
    labels = ordered_decode(restrict_scores(arr, vocabulary, best_name))
    return best_name, labels

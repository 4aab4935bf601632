"""Pseudo-labels from vision-language state scores.

Each frame of a video carries three similarity scores (initial,
transitioning, end state of one transition). A thresholded margin rule maps
scores to frame labels, an ordering pass demotes frames that contradict the
initial -> transitioning -> end progression, and a grid search picks the
thresholds against a small annotated calibration set.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import isfinite

import numpy as np

from . import kernels
from .core import StateLabel, as_label_array, as_score_matrix
from .evaluation import frame_metrics

__all__ = [
    "Thresholds",
    "assign_frame_label",
    "assign_video_labels",
    "enforce_causal_order",
    "threshold_score_surface",
    "grid_search_thresholds",
    "label_stats",
]


@dataclass(frozen=True)
class Thresholds:
    """Background threshold tau (on the raw score row sum) and margin delta."""

    tau: float
    delta: float

    def __post_init__(self):
        if not isfinite(self.tau):
            raise ValueError(f"tau must be finite, got {self.tau}")
        if not (isfinite(self.delta) and self.delta >= 0.0):
            raise ValueError(f"delta must be finite and >= 0, got {self.delta}")


def assign_frame_label(row, thresholds: Thresholds) -> StateLabel:
    """Label a single frame from its three state scores.

    Background when the row sum falls below tau; otherwise the first state
    whose score exceeds both others by more than delta, checked in
    initial / transitioning / end order; ambiguous when none dominates.
    """
    row = np.asarray(row, dtype=np.float64)
    if row.shape != (3,):
        raise ValueError(f"expected 3 scores, got shape {row.shape}")
    if not np.isfinite(row).all():
        raise ValueError("scores must be finite")
    tau, delta = thresholds.tau, thresholds.delta
    if (float(row[0]) + float(row[1])) + float(row[2]) < tau:
        return StateLabel.BACKGROUND
    if row[0] - row[1] > delta and row[0] - row[2] > delta:
        return StateLabel.INITIAL
    if row[1] - row[0] > delta and row[1] - row[2] > delta:
        return StateLabel.TRANSITIONING
    if row[2] - row[0] > delta and row[2] - row[1] > delta:
        return StateLabel.END
    return StateLabel.AMBIGUOUS


def assign_video_labels(scores, thresholds: Thresholds) -> np.ndarray:
    """Apply the frame rule to every row of a T x 3 score matrix."""
    scores = as_score_matrix(scores)
    return kernels.rule_labels(scores, thresholds.tau, thresholds.delta)


def enforce_causal_order(labels) -> np.ndarray:
    """Demote state frames breaking the initial <= transitioning <= end order.

    Keeps a maximum-cardinality subsequence of the state-labeled frames whose
    stages are non-decreasing and relabels the rest ambiguous. Background and
    ambiguous frames pass through. Idempotent.
    """
    return kernels.causal_order(as_label_array(labels))


def _masked_video_f1(pred: np.ndarray, gt: np.ndarray) -> float | None:
    keep = pred != StateLabel.AMBIGUOUS
    if not keep.any():
        return None
    result = frame_metrics(pred[keep], gt[keep])
    return result.f1


def threshold_score_surface(videos, tau_grid, delta_grid,
                            refine: bool = True) -> np.ndarray:
    """Mean frame F1 for every (tau, delta) cell of the grid.

    videos is a list of (scores, gt_labels) pairs. For each cell the rule
    (plus the ordering pass when refine is set) produces labels, frames the
    prediction marks ambiguous are dropped on both sides, and the remaining
    frames are scored like any prediction. Videos left without ground-truth
    state frames are skipped; an empty cell scores 0.
    """
    tau_grid = np.asarray(tau_grid, dtype=np.float64)
    delta_grid = np.asarray(delta_grid, dtype=np.float64)
    if tau_grid.ndim != 1 or tau_grid.size == 0:
        raise ValueError("tau grid must be a non-empty 1-d sequence")
    if delta_grid.ndim != 1 or delta_grid.size == 0:
        raise ValueError("delta grid must be a non-empty 1-d sequence")
    prepared = [(as_score_matrix(s), as_label_array(g)) for s, g in videos]
    if not prepared:
        raise ValueError("no calibration videos")
    for scores, gt in prepared:
        if scores.shape[0] != gt.shape[0]:
            raise ValueError("scores and labels disagree on frame count")
        if (gt == StateLabel.AMBIGUOUS).any():
            raise ValueError("calibration ground truth contains ambiguous frames")

    surface = np.zeros((tau_grid.size, delta_grid.size), dtype=np.float64)
    for i, tau in enumerate(tau_grid):
        for j, delta in enumerate(delta_grid):
            th = Thresholds(float(tau), float(delta))
            scores_f1 = []
            for scores, gt in prepared:
                pred = assign_video_labels(scores, th)
                if refine:
                    pred = enforce_causal_order(pred)
                f1 = _masked_video_f1(pred, gt)
                if f1 is not None:
                    scores_f1.append(f1)
            surface[i, j] = sum(scores_f1) / len(scores_f1) if scores_f1 else 0.0
    return surface


def grid_search_thresholds(videos, tau_grid, delta_grid,
                           refine: bool = True) -> tuple[Thresholds, float]:
    """Pick the grid cell with the best mean frame F1.

    Grids are searched in ascending order and ties keep the earlier cell, so
    the smallest tau and then the smallest delta win.
    """
    tau_grid = np.sort(np.unique(np.asarray(tau_grid, dtype=np.float64)))
    delta_grid = np.sort(np.unique(np.asarray(delta_grid, dtype=np.float64)))
    surface = threshold_score_surface(videos, tau_grid, delta_grid, refine)
    flat = int(np.argmax(surface))
    i, j = divmod(flat, delta_grid.size)
    best = Thresholds(float(tau_grid[i]), float(delta_grid[j]))
    return best, float(surface[i, j])


def label_stats(labels) -> dict[str, dict[str, float | int]]:
    """Counts and fractions per label, for logging label balance."""
    labels = as_label_array(labels)
    total = labels.shape[0]
    out: dict[str, dict[str, float | int]] = {}
    for s in StateLabel:
        count = int((labels == s).sum())
        out[s.name.lower()] = {
            "count": count,
            "fraction": count / total if total else 0.0,
        }
    return out

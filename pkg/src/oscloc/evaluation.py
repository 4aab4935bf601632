"""Frame-classification metrics and the reporting protocol.

Metrics are computed per video over the states actually present in the
ground truth (a video may lack some states), averaged over those states,
then over videos within a state transition, then unweighted over
transitions. Known and novel splits are reported separately.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    STATES_IN_ORDER,
    AnnotationSet,
    OscCategory,
    StateLabel,
    as_label_array,
)

__all__ = [
    "VideoResult",
    "Report",
    "frame_metrics",
    "state_precision_at_1",
    "aggregate",
    "retrieve_nearest_furthest",
]


@dataclass
class VideoResult:
    """Per-video metrics over the states present in its ground truth.

    Video-level values are means over present states; they are None for
    videos whose ground truth contains no state frames (such videos are
    excluded from aggregation and only counted).
    """

    states_present: tuple[StateLabel, ...]
    per_state_precision: dict[StateLabel, float] = field(default_factory=dict)
    per_state_recall: dict[StateLabel, float] = field(default_factory=dict)
    per_state_f1: dict[StateLabel, float] = field(default_factory=dict)
    precision: float | None = None
    recall: float | None = None
    f1: float | None = None
    p1_hits: dict[StateLabel, bool] | None = None
    p1: float | None = None


def frame_metrics(pred, gt) -> VideoResult:
    """Per-state precision/recall/F1 of predicted frame labels.

    For each state present in the ground truth: precision = TP/(TP+FP),
    recall = TP/(TP+FN), F1 their harmonic mean, all 0 when the denominator
    is 0. Background frames enter only through the confusion counts.
    Neither sequence may contain ambiguous frames.
    """
    pred = as_label_array(pred)
    gt = as_label_array(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"length mismatch: {pred.shape[0]} vs {gt.shape[0]}")
    if (pred == StateLabel.AMBIGUOUS).any() or (gt == StateLabel.AMBIGUOUS).any():
        raise ValueError("ambiguous frames are not allowed in metric inputs")

    result = VideoResult(states_present=tuple(
        s for s in STATES_IN_ORDER if (gt == s).any()
    ))
    for s in result.states_present:
        tp = int(((pred == s) & (gt == s)).sum())
        fp = int(((pred == s) & (gt != s)).sum())
        fn = int(((pred != s) & (gt == s)).sum())
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * p * r / (p + r) if p + r else 0.0
        result.per_state_precision[s] = p
        result.per_state_recall[s] = r
        result.per_state_f1[s] = f1

    if result.states_present:
        n = len(result.states_present)
        result.precision = sum(result.per_state_precision.values()) / n
        result.recall = sum(result.per_state_recall.values()) / n
        result.f1 = sum(result.per_state_f1.values()) / n
    return result


def _interval_hit(frame: int, ranges) -> bool:
    # the frame's one-second bin [frame, frame+1) intersecting the closed
    # annotated range counts as correct
    return any(start < frame + 1 and end >= frame for start, end in ranges)


def state_precision_at_1(top1: dict[StateLabel, int],
                         ann: AnnotationSet) -> tuple[dict[StateLabel, bool], float | None]:
    """Judge the single highest-scoring frame per state against annotations.

    Returns per-state hit flags for the states present in the annotation and
    their mean (None when no state is present).
    """
    hits: dict[StateLabel, bool] = {}
    for state in ann.present_states():
        if state not in top1:
            raise ValueError(f"top-1 selection missing present state {state.name}")
        hits[state] = _interval_hit(int(top1[state]), ann.ranges_for(state))
    mean = sum(hits.values()) / len(hits) if hits else None
    return hits, mean


@dataclass
class Report:
    """Three-level means: states -> video -> transition -> overall."""

    per_transition: dict[str, dict[str, dict[str, float | int | None]]]
    overall: dict[str, dict[str, float | int | None]]
    skipped_videos: int

    def to_dict(self) -> dict:
        return {
            "overall": self.overall,
            "per_transition": self.per_transition,
            "diagnostics": {"skipped_videos": self.skipped_videos},
        }


def _mean(values) -> float | None:
    values = [v for v in values if v is not None]
    return sum(values) / len(values) if values else None


def aggregate(results: list[tuple[VideoResult, OscCategory, str]]) -> Report:
    """Aggregate per-video results into the per-transition / per-split report.

    Videos whose ground truth has no state frames are skipped and counted.
    The overall mean weights every transition equally regardless of its
    video count; a transition absent from a split is omitted from that
    split's overall mean.
    """
    if not results:
        raise ValueError("no results to aggregate")

    skipped = 0
    buckets: dict[tuple[str, str], list[VideoResult]] = {}
    for res, osc, split in results:
        if split not in ("known", "novel"):
            raise ValueError(f"split must be 'known' or 'novel', got {split!r}")
        if not res.states_present:
            skipped += 1
            continue
        buckets.setdefault((osc.transition, split), []).append(res)

    per_transition: dict[str, dict[str, dict]] = {}
    for (transition, split), items in sorted(buckets.items()):
        per_transition.setdefault(transition, {})[split] = {
            "f1": _mean(r.f1 for r in items),
            "precision": _mean(r.precision for r in items),
            "precision_at_1": _mean(r.p1 for r in items),
            "videos": len(items),
        }

    overall: dict[str, dict] = {}
    for split in ("known", "novel"):
        rows = [per_transition[t][split] for t in sorted(per_transition)
                if split in per_transition[t]]
        if not rows:
            continue
        overall[split] = {
            "f1": _mean(r["f1"] for r in rows),
            "precision": _mean(r["precision"] for r in rows),
            "precision_at_1": _mean(r["precision_at_1"] for r in rows),
            "videos": sum(r["videos"] for r in rows),
            "transitions": len(rows),
        }
    return Report(per_transition=per_transition, overall=overall,
                  skipped_videos=skipped)


def retrieve_nearest_furthest(query: np.ndarray,
                              pool: list[tuple[np.ndarray, OscCategory]]):
    """Cosine-distance nearest and furthest pool entries for a query embedding.

    Ties go to the first occurrence. Zero-norm embeddings are rejected.
    """
    if not pool:
        raise ValueError("empty retrieval pool")
    q = np.asarray(query, dtype=np.float64)
    qn = np.linalg.norm(q)
    if qn == 0.0:
        raise ValueError("zero-norm query embedding")
    embs = np.stack([np.asarray(e, dtype=np.float64) for e, _ in pool])
    if embs.shape[1] != q.shape[0]:
        raise ValueError("embedding dimension mismatch")
    norms = np.linalg.norm(embs, axis=1)
    if (norms == 0.0).any():
        raise ValueError("zero-norm embedding in pool")
    dist = 1.0 - (embs @ q) / (norms * qn)
    return pool[int(np.argmin(dist))], pool[int(np.argmax(dist))]

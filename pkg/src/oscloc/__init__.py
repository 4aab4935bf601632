"""Temporal localization of object state changes in video.

The pipeline turns per-frame vision-language state scores into pseudo-labels,
trains a small temporal transformer on them, and decodes ordered state
sequences (initial -> transitioning -> end) that are scored against frame
annotations. Works for object categories never seen in training when the
label space is shared across objects.
"""

from .core import (
    AnnotationError,
    AnnotationSet,
    FeatureSequence,
    OscCategory,
    StateLabel,
    StateVocabulary,
    VocabularyError,
    VocabularyMode,
    build_vocabulary,
    labels_from_ranges,
    labels_from_str,
    labels_to_str,
    make_annotation,
    ranges_from_labels,
)
from .decode import argmax_decode, hierarchical_decode, ordered_decode, top1_frames
from .evaluation import Report, VideoResult, aggregate, frame_metrics
from .pseudolabel import (
    Thresholds,
    assign_video_labels,
    enforce_causal_order,
    grid_search_thresholds,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotationError",
    "AnnotationSet",
    "FeatureSequence",
    "OscCategory",
    "Report",
    "StateLabel",
    "StateVocabulary",
    "Thresholds",
    "VideoResult",
    "VocabularyError",
    "VocabularyMode",
    "aggregate",
    "argmax_decode",
    "assign_video_labels",
    "build_vocabulary",
    "enforce_causal_order",
    "frame_metrics",
    "grid_search_thresholds",
    "hierarchical_decode",
    "labels_from_ranges",
    "labels_from_str",
    "labels_to_str",
    "make_annotation",
    "ordered_decode",
    "ranges_from_labels",
    "top1_frames",
    "__version__",
]

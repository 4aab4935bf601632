"""File formats: feature/score matrices, annotations, manifests, label maps.

Matrix files are little-endian binary with a 16-byte header (4-byte magic,
uint32 version, uint32 rows, uint32 columns) followed by row-major float32
data. "OSCF" holds per-frame features, "OSCS" per-frame scores. Annotations
are JSON, datasets are described by a JSONL manifest with one video per line.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import AnnotationSet, OscCategory, as_label_array, labels_from_str, labels_to_str, make_annotation

__all__ = [
    "FormatError",
    "ManifestError",
    "ManifestEntry",
    "read_features",
    "write_features",
    "read_scores",
    "write_scores",
    "read_annotation",
    "write_annotation",
    "read_manifest",
    "write_manifest",
    "read_label_file",
    "write_label_file",
]

FEATURE_MAGIC = b"OSCF"
SCORE_MAGIC = b"OSCS"
MATRIX_VERSION = 1

SPLITS = ("known", "novel")
SUBSETS = ("train", "val", "test")


class FormatError(ValueError):
    pass


class ManifestError(ValueError):
    pass


def _write_matrix(path, magic: bytes, matrix) -> None:
    arr = np.asarray(matrix, dtype="<f4")
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise FormatError(f"matrix must be 2-d and non-empty, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise FormatError("matrix values must be finite")
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<III", MATRIX_VERSION, arr.shape[0], arr.shape[1]))
        fh.write(np.ascontiguousarray(arr).tobytes())


def _read_matrix(path, magic: bytes, kind: str) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 16:
        raise FormatError(f"{path}: truncated {kind} file")
    if data[:4] != magic:
        raise FormatError(f"{path}: not a {kind} file (bad magic)")
    version, rows, cols = struct.unpack("<III", data[4:16])
    if version != MATRIX_VERSION:
        raise FormatError(f"{path}: unsupported {kind} version {version}")
    if rows < 1 or cols < 1:
        raise FormatError(f"{path}: empty {kind} matrix")
    expected = 16 + 4 * rows * cols
    if len(data) != expected:
        raise FormatError(
            f"{path}: {kind} file is {len(data)} bytes, expected {expected}")
    arr = np.frombuffer(data, dtype="<f4", offset=16).reshape(rows, cols)
    if not np.isfinite(arr).all():
        raise FormatError(f"{path}: non-finite values in {kind} file")
    return arr.copy()


def write_features(path, features) -> None:
    """Store a (frames, dim) float32 feature matrix."""
    _write_matrix(path, FEATURE_MAGIC, features)


def read_features(path) -> np.ndarray:
    return _read_matrix(path, FEATURE_MAGIC, "feature")


def write_scores(path, scores) -> None:
    """Store a (frames, columns) float32 score matrix (state scores or
    classifier outputs)."""
    _write_matrix(path, SCORE_MAGIC, scores)


def read_scores(path) -> np.ndarray:
    return _read_matrix(path, SCORE_MAGIC, "score")


def write_annotation(path, video_id: str, osc: OscCategory,
                     annotation: AnnotationSet) -> None:
    doc = {
        "video_id": video_id,
        "osc": {"object": osc.obj, "transition": osc.transition},
        "duration_s": annotation.duration_s,
        "ranges": {
            "initial": [list(r) for r in annotation.initial_ranges],
            "transitioning": [list(r) for r in annotation.transitioning_ranges],
            "end": [list(r) for r in annotation.end_ranges],
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_annotation(path) -> tuple[str, OscCategory, AnnotationSet]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        osc = OscCategory(doc["osc"]["object"], doc["osc"]["transition"])
        ranges = doc["ranges"]
        ann = make_annotation(
            initial=ranges.get("initial", ()),
            transitioning=ranges.get("transitioning", ()),
            end=ranges.get("end", ()),
            duration_s=doc["duration_s"],
        )
        return str(doc["video_id"]), osc, ann
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: bad annotation file: {exc}") from None


@dataclass(frozen=True)
class ManifestEntry:
    """One video of a dataset: identity, file paths, category, and splits."""

    video_id: str
    osc: OscCategory
    split: str
    subset: str
    duration_s: float
    features: str
    scores: str
    annotations: str | None = None

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ManifestError(f"split must be one of {SPLITS}, "
                                f"got {self.split!r}")
        if self.subset not in SUBSETS:
            raise ManifestError(f"subset must be one of {SUBSETS}, "
                                f"got {self.subset!r}")
        if self.split == "novel" and self.subset == "train":
            raise ManifestError(
                f"{self.video_id}: novel-object videos cannot be in the "
                f"training subset")
        if self.duration_s <= 0:
            raise ManifestError(f"{self.video_id}: duration must be positive")


def write_manifest(path, entries: list[ManifestEntry]) -> None:
    """One JSON object per line; paths are written as given."""
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            doc = {
                "video_id": e.video_id,
                "osc": {"object": e.osc.obj, "transition": e.osc.transition},
                "split": e.split,
                "subset": e.subset,
                "duration_s": e.duration_s,
                "features": e.features,
                "scores": e.scores,
            }
            if e.annotations is not None:
                doc["annotations"] = e.annotations
            fh.write(json.dumps(doc, separators=(", ", ": ")))
            fh.write("\n")


def read_manifest(path) -> list[ManifestEntry]:
    """Parse a manifest; relative file paths are resolved against its
    directory. Duplicate video ids are rejected."""
    base = Path(path).parent
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
                entry = ManifestEntry(
                    video_id=str(doc["video_id"]),
                    osc=OscCategory(doc["osc"]["object"],
                                    doc["osc"]["transition"]),
                    split=doc["split"],
                    subset=doc["subset"],
                    duration_s=float(doc["duration_s"]),
                    features=str(base / doc["features"]),
                    scores=str(base / doc["scores"]),
                    annotations=(str(base / doc["annotations"])
                                 if "annotations" in doc else None),
                )
            except ManifestError:
                raise
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
                raise ManifestError(f"{path}:{lineno}: bad manifest line: "
                                    f"{exc}") from None
            if entry.video_id in seen:
                raise ManifestError(f"{path}:{lineno}: duplicate video id "
                                    f"{entry.video_id!r}")
            seen.add(entry.video_id)
            entries.append(entry)
    if not entries:
        raise ManifestError(f"{path}: empty manifest")
    return entries


def write_label_file(path, labels_by_video: dict[str, np.ndarray]) -> None:
    """Store label sequences as one-character-per-frame strings keyed by
    video id, sorted for reproducible bytes."""
    doc = {vid: labels_to_str(as_label_array(labels))
           for vid, labels in labels_by_video.items()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_label_file(path) -> dict[str, np.ndarray]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        return {str(vid): labels_from_str(text) for vid, text in doc.items()}
    except (TypeError, ValueError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: bad label file: {exc}") from None

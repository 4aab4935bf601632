"""Seeded synthetic videos with controllable geometry.

Each transition gets three anchor points in feature space placed on a line
(initial, midpoint, end, spaced by a separation scale) and a background
prototype far off that line. Objects of a transition share the anchors but
are shifted by a fixed-norm offset orthogonal to the line, so per-frame
state scores (negative squared distance to each anchor, plus optional
noise) keep identical margins and row-sum gaps across objects. Transitioning
frames drift along the line strictly inside the middle half, which keeps the
midpoint anchor their nearest. Ground truth falls out of the construction.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .core import AnnotationSet, OscCategory, StateLabel, labels_from_ranges, make_annotation
from .dataio import (
    ManifestEntry,
    write_annotation,
    write_features,
    write_manifest,
    write_scores,
)

__all__ = [
    "SynthConfig",
    "SyntheticVideo",
    "SyntheticDataset",
    "default_table",
    "generate_dataset",
    "write_dataset",
]


def default_table(num_transitions: int = 2, known_per: int = 3,
                  novel_per: int = 1) -> dict[str, tuple[list[str], list[str]]]:
    """Placeholder transition/object names for quick datasets."""
    if num_transitions < 1 or known_per < 1 or novel_per < 0:
        raise ValueError("need >= 1 transition and >= 1 known object")
    table = {}
    for t in range(num_transitions):
        known = [f"object{t}{chr(ord('a') + j)}" for j in range(known_per)]
        novel = [f"novel{t}{chr(ord('a') + j)}" for j in range(novel_per)]
        table[f"transition{t}"] = (known, novel)
    return table


@dataclass(frozen=True)
class SynthConfig:
    """Knobs for the generator; defaults give an easy, clean dataset."""

    table: dict[str, tuple[list[str], list[str]]] = field(
        default_factory=default_table)
    feature_dim: int = 16
    videos_per_object: int = 8
    min_frames: int = 20
    max_frames: int = 40
    bg_fraction: float = 0.3
    separation: float = 2.0
    offset_scale: float = 1.0
    noise_sigma: float = 0.0
    jitter_sigma: float = 0.0
    confusion_rate: float = 0.0
    train_fraction: float = 0.5
    val_fraction: float = 0.25

    def __post_init__(self):
        if self.feature_dim < 4:
            raise ValueError("feature_dim must be >= 4 (anchors and offsets "
                             "need independent directions)")
        if not 8 <= self.min_frames <= self.max_frames:
            raise ValueError("need 8 <= min_frames <= max_frames")
        if not 0.0 <= self.bg_fraction < 1.0:
            raise ValueError("bg_fraction must be in [0, 1)")
        if self.separation <= 0 or self.offset_scale < 0:
            raise ValueError("separation must be positive, offset_scale >= 0")
        if self.noise_sigma < 0 or self.jitter_sigma < 0:
            raise ValueError("noise levels must be >= 0")
        if not 0.0 <= self.confusion_rate < 1.0:
            raise ValueError("confusion_rate must be in [0, 1)")
        if self.videos_per_object < 2:
            raise ValueError("videos_per_object must be >= 2")
        if not (0 < self.train_fraction and 0 < self.val_fraction
                and self.train_fraction + self.val_fraction < 1):
            raise ValueError("train/val fractions must be positive and leave "
                             "room for a test subset")


@dataclass(frozen=True)
class SyntheticVideo:
    video_id: str
    osc: OscCategory
    split: str
    subset: str
    features: np.ndarray
    scores: np.ndarray
    annotation: AnnotationSet

    def gt_labels(self) -> np.ndarray:
        return labels_from_ranges(self.annotation, self.features.shape[0])


@dataclass(frozen=True)
class SyntheticDataset:
    config: SynthConfig
    seed: int
    videos: tuple[SyntheticVideo, ...]
    tau_hint: float
    delta_hint: float


def _unit(rng: np.random.Generator, dim: int,
          orthogonal_to=()) -> np.ndarray:
    v = rng.standard_normal(dim)
    for basis in orthogonal_to:
        v -= (v @ basis) * basis
    norm = np.linalg.norm(v)
    if norm < 1e-9:
        raise RuntimeError("degenerate direction draw")
    return v / norm


def _segment_layout(rng: np.random.Generator, config: SynthConfig):
    """Frame counts (bg, initial, bg, transitioning, bg, end, bg)."""
    total = int(rng.integers(config.min_frames, config.max_frames + 1))
    bg_total = min(int(round(config.bg_fraction * total)), total - 6)
    state_total = total - bg_total
    extra = rng.multinomial(state_total - 6, [1 / 3] * 3)
    states = [2 + int(e) for e in extra]
    gaps = [int(g) for g in rng.multinomial(bg_total, [1 / 4] * 4)]
    return gaps, states


def _video_frames(rng, config, anchors, background, offset):
    """Features, scores, and the annotation for one video."""
    gaps, (n_init, n_trans, n_end) = _segment_layout(rng, config)
    segments = []
    # (state, count) in timeline order with background gaps in between
    plan = [
        (None, gaps[0]),
        (StateLabel.INITIAL, n_init),
        (None, gaps[1]),
        (StateLabel.TRANSITIONING, n_trans),
        (None, gaps[2]),
        (StateLabel.END, n_end),
        (None, gaps[3]),
    ]
    span = anchors[2] - anchors[0]
    for state, count in plan:
        if count == 0:
            continue
        if state is None:
            base = np.tile(background, (count, 1))
        elif state is StateLabel.INITIAL:
            base = np.tile(anchors[0], (count, 1))
        elif state is StateLabel.END:
            base = np.tile(anchors[2], (count, 1))
        else:
            # drift across the middle half of the line, strictly inside
            # (1/4, 3/4) so the midpoint anchor stays nearest
            progress = np.linspace(0.3, 0.7, count)
            base = anchors[0] + progress[:, None] * span
        segments.append(base + offset)
    features = np.concatenate(segments, axis=0)
    if config.jitter_sigma > 0:
        features = features + rng.normal(0.0, config.jitter_sigma,
                                         features.shape)

    d2 = ((features[:, None, :] - anchors[None, :, :]) ** 2).sum(axis=2)
    scores = -d2
    if config.noise_sigma > 0:
        scores = scores + rng.normal(0.0, config.noise_sigma, scores.shape)
    if config.confusion_rate > 0:
        # premature end-state flashes: on in-progress frames the end
        # description sometimes fires hard enough to win the argmax, the
        # systematic mismatch the ordering refinement exists to absorb
        start = gaps[0] + n_init + gaps[1]
        hit = rng.random(n_trans) < config.confusion_rate
        boost = 1.5 * config.separation ** 2
        scores[start:start + n_trans, 2][hit] += boost

    t0 = gaps[0]
    t1 = t0 + n_init + gaps[1]
    t2 = t1 + n_trans + gaps[2]
    annotation = make_annotation(
        initial=[(float(t0), float(t0 + n_init))],
        transitioning=[(float(t1), float(t1 + n_trans))],
        end=[(float(t2), float(t2 + n_end))],
        duration_s=float(features.shape[0]),
    )
    return features, scores, annotation


def _subset_counts(n: int, config: SynthConfig) -> list[str]:
    n_train = max(1, int(round(config.train_fraction * n)))
    n_val = max(1, int(round(config.val_fraction * n)))
    while n_train + n_val >= n:
        if n_train > 1:
            n_train -= 1
        else:
            n_val -= 1
    return ["train"] * n_train + ["val"] * n_val + ["test"] * (n - n_train - n_val)


def generate_dataset(config: SynthConfig, seed: int) -> SyntheticDataset:
    """Deterministic dataset for a seed: videos for every known and novel
    object, plus threshold hints measured from the generated scores.

    tau_hint is the midpoint between the largest background row sum and the
    smallest state-frame row sum; delta_hint is half the smallest winning
    margin over state frames. With zero noise the frame rule at these hints
    reproduces the ground truth exactly.
    """
    rng = np.random.default_rng(seed)
    dim, sep = config.feature_dim, config.separation

    videos: list[SyntheticVideo] = []
    bg_sums: list[float] = []
    state_sums: list[float] = []
    margins: list[float] = []
    for transition in sorted(config.table):
        known, novel = config.table[transition]
        center = rng.standard_normal(dim)
        u = _unit(rng, dim)
        w = _unit(rng, dim, orthogonal_to=(u,))
        anchors = np.stack([
            center - 0.5 * sep * u,
            center,
            center + 0.5 * sep * u,
        ])
        background = center + 2.0 * sep * w

        for split, objects in (("known", known), ("novel", novel)):
            for obj in sorted(objects):
                offset = config.offset_scale * _unit(
                    rng, dim, orthogonal_to=(u, w))
                subsets = (_subset_counts(config.videos_per_object, config)
                           if split == "known" else
                           ["val", "test"] * config.videos_per_object)
                for k in range(config.videos_per_object):
                    features, scores, annotation = _video_frames(
                        rng, config, anchors, background, offset)
                    video = SyntheticVideo(
                        video_id=f"{transition}-{obj}-{k:03d}",
                        osc=OscCategory(obj, transition),
                        split=split,
                        subset=subsets[k],
                        features=features.astype(np.float32),
                        scores=scores.astype(np.float32),
                        annotation=annotation,
                    )
                    videos.append(video)

                    gt = video.gt_labels()
                    sums = scores.sum(axis=1)
                    bg_sums.extend(sums[gt == StateLabel.BACKGROUND])
                    state_sums.extend(sums[gt != StateLabel.BACKGROUND])
                    state_rows = scores[gt != StateLabel.BACKGROUND]
                    top2 = np.sort(state_rows, axis=1)[:, 1:]
                    margins.extend(top2[:, 1] - top2[:, 0])

    tau_hint = (max(bg_sums) + min(state_sums)) / 2.0
    delta_hint = max(0.0, min(margins) / 2.0)
    return SyntheticDataset(config=config, seed=seed, videos=tuple(videos),
                            tau_hint=float(tau_hint),
                            delta_hint=float(delta_hint))


def write_dataset(dataset: SyntheticDataset, out_dir) -> Path:
    """Materialize a dataset: matrix files, annotations, manifest, meta.json.

    Returns the manifest path. Paths inside the manifest are relative to it.
    """
    out = Path(out_dir)
    for sub in ("features", "scores", "annotations"):
        (out / sub).mkdir(parents=True, exist_ok=True)

    entries = []
    for v in dataset.videos:
        write_features(out / "features" / f"{v.video_id}.oscf", v.features)
        write_scores(out / "scores" / f"{v.video_id}.oscs", v.scores)
        write_annotation(out / "annotations" / f"{v.video_id}.json",
                         v.video_id, v.osc, v.annotation)
        entries.append(ManifestEntry(
            video_id=v.video_id,
            osc=v.osc,
            split=v.split,
            subset=v.subset,
            duration_s=v.annotation.duration_s,
            features=f"features/{v.video_id}.oscf",
            scores=f"scores/{v.video_id}.oscs",
            annotations=f"annotations/{v.video_id}.json",
        ))
    manifest_path = out / "manifest.jsonl"
    write_manifest(manifest_path, entries)

    config = asdict(dataset.config)
    config["table"] = {t: [list(k), list(n)]
                       for t, (k, n) in sorted(dataset.config.table.items())}
    meta = {
        "seed": dataset.seed,
        "tau_hint": dataset.tau_hint,
        "delta_hint": dataset.delta_hint,
        "config": config,
        "videos": len(dataset.videos),
    }
    with open(out / "meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest_path

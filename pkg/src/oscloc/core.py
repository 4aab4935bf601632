"""Domain types shared across the package.

A video is a sequence of T frames sampled at one frame per second. Each frame
carries a state label: background, one of the three change states
(initial / transitioning / end), or - in pseudo-label sequences only -
ambiguous. Label sequences are stored as int8 numpy arrays of StateLabel
codes; frame t covers the half-open interval [t, t+1) seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum

import numpy as np

__all__ = [
    "StateLabel",
    "STATE_CHARS",
    "STATES_IN_ORDER",
    "labels_to_str",
    "labels_from_str",
    "as_label_array",
    "as_score_matrix",
    "OscCategory",
    "VocabularyMode",
    "StateVocabulary",
    "build_vocabulary",
    "VocabularyError",
    "AnnotationSet",
    "AnnotationError",
    "labels_from_ranges",
    "ranges_from_labels",
    "FeatureSequence",
]


class StateLabel(IntEnum):
    """Frame label. Codes double as classifier class indices (background 0)."""

    BACKGROUND = 0
    INITIAL = 1
    TRANSITIONING = 2
    END = 3
    AMBIGUOUS = 4


STATES_IN_ORDER = (StateLabel.INITIAL, StateLabel.TRANSITIONING, StateLabel.END)

STATE_CHARS = "BITEA"
_CHAR_TO_CODE = {c: i for i, c in enumerate(STATE_CHARS)}


def labels_to_str(labels: np.ndarray) -> str:
    """Compact one-character-per-frame encoding, e.g. 'BIITTEB'."""
    return "".join(STATE_CHARS[int(v)] for v in labels)


def labels_from_str(text: str) -> np.ndarray:
    try:
        return np.array([_CHAR_TO_CODE[c] for c in text], dtype=np.int8)
    except KeyError as exc:
        raise ValueError(f"invalid label character {exc.args[0]!r}") from None


def as_label_array(labels) -> np.ndarray:
    """Validate and convert a label sequence to an int8 array."""
    arr = np.asarray(labels, dtype=np.int8)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError("label sequence must be a non-empty 1-d array")
    if arr.min() < 0 or arr.max() > 4:
        raise ValueError("label codes must be in 0..4")
    return arr


def as_score_matrix(scores) -> np.ndarray:
    """Validate and convert per-frame state scores to a float64 T x 3 matrix."""
    arr = np.asarray(scores, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] < 1:
        raise ValueError(f"expected a T x 3 score matrix, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("scores must be finite")
    return arr


def _canonical(name: str) -> str:
    return name.strip().lower()


class VocabularyError(ValueError):
    pass


class AnnotationError(ValueError):
    pass


@dataclass(frozen=True)
class OscCategory:
    """An object paired with a state transition, e.g. chicken + shredding."""

    obj: str
    transition: str

    def __post_init__(self):
        object.__setattr__(self, "obj", _canonical(self.obj))
        object.__setattr__(self, "transition", _canonical(self.transition))
        if not self.obj or not self.transition:
            raise ValueError("object and transition must be non-empty")


class VocabularyMode(Enum):
    SHARED = "shared"
    PER_OSC = "per-osc"
    MULTI_TASK = "multitask"


@dataclass(frozen=True)
class StateVocabulary:
    """Label space over transitions and objects.

    Class indices are deterministic: background is 0; transitions are taken
    in lexicographic order, known objects within a transition likewise, and
    the three states in initial/transitioning/end order.
    """

    mode: VocabularyMode
    transitions: tuple[str, ...]
    known_objects: dict[str, tuple[str, ...]]
    novel_objects: dict[str, tuple[str, ...]]
    label_count: int = field(init=False)

    def __post_init__(self):
        if self.mode is VocabularyMode.SHARED:
            k = 3
        elif self.mode is VocabularyMode.PER_OSC:
            k = 3 * sum(len(self.known_objects[t]) for t in self.transitions)
        else:
            k = 3 * len(self.transitions)
        object.__setattr__(self, "label_count", k)

    @property
    def num_classes(self) -> int:
        """Classifier output dimension: label_count plus background."""
        return self.label_count + 1

    def transition_index(self, transition: str) -> int:
        try:
            return self.transitions.index(_canonical(transition))
        except ValueError:
            raise VocabularyError(f"unknown transition {transition!r}") from None

    def _object_position(self, transition: str, obj: str) -> int:
        """Global index of a known object over (transition, object) pairs."""
        t_idx = self.transition_index(transition)
        obj = _canonical(obj)
        offset = sum(len(self.known_objects[t]) for t in self.transitions[:t_idx])
        try:
            return offset + self.known_objects[self.transitions[t_idx]].index(obj)
        except ValueError:
            raise VocabularyError(
                f"object {obj!r} is not a known object of {transition!r}"
            ) from None

    def class_index(self, state: StateLabel, transition: str | None = None,
                    obj: str | None = None) -> int:
        if state == StateLabel.BACKGROUND:
            return 0
        if state == StateLabel.AMBIGUOUS:
            raise VocabularyError("ambiguous is not a classifier class")
        s = int(state) - 1
        if self.mode is VocabularyMode.SHARED:
            return 1 + s
        if transition is None:
            raise VocabularyError("transition required in this mode")
        if self.mode is VocabularyMode.MULTI_TASK:
            return 1 + 3 * self.transition_index(transition) + s
        if obj is None:
            raise VocabularyError("object required in per-osc mode")
        return 1 + 3 * self._object_position(transition, obj) + s

    def decompose(self, index: int) -> tuple[str | None, str | None, StateLabel]:
        """Inverse of class_index: (transition, object, state)."""
        if not 0 <= index <= self.label_count:
            raise VocabularyError(f"class index {index} out of range")
        if index == 0:
            return None, None, StateLabel.BACKGROUND
        group, s = divmod(index - 1, 3)
        state = StateLabel(s + 1)
        if self.mode is VocabularyMode.SHARED:
            return None, None, state
        if self.mode is VocabularyMode.MULTI_TASK:
            return self.transitions[group], None, state
        for t in self.transitions:
            n = len(self.known_objects[t])
            if group < n:
                return t, self.known_objects[t][group], state
            group -= n
        raise AssertionError("unreachable")

    def state_of_class(self, index: int) -> StateLabel:
        return self.decompose(index)[2]

    def state_class_indices(self, transition: str,
                            obj: str | None = None) -> tuple[int, int, int]:
        """Class indices of (initial, transitioning, end) for one transition
        (per-osc mode additionally needs the object)."""
        return tuple(
            self.class_index(s, transition, obj) for s in STATES_IN_ORDER
        )


def build_vocabulary(mode: VocabularyMode | str,
                     table: dict[str, tuple[list[str], list[str]]]) -> StateVocabulary:
    """Build the label space from {transition: (known objects, novel objects)}.

    Names are trimmed and lower-cased. Duplicate entries and known/novel
    overlaps are rejected.
    """
    if isinstance(mode, str):
        mode = VocabularyMode(mode)
    if not table:
        raise VocabularyError("transition table is empty")

    transitions = []
    known: dict[str, tuple[str, ...]] = {}
    novel: dict[str, tuple[str, ...]] = {}
    for raw_name, (known_objs, novel_objs) in table.items():
        name = _canonical(raw_name)
        if not name:
            raise VocabularyError("transition name is empty")
        if name in known:
            raise VocabularyError(f"duplicate transition {name!r}")
        k = [_canonical(o) for o in known_objs]
        v = [_canonical(o) for o in novel_objs]
        if not k:
            raise VocabularyError(f"transition {name!r} has no known objects")
        if len(set(k)) != len(k) or len(set(v)) != len(v):
            raise VocabularyError(f"duplicate object under transition {name!r}")
        overlap = set(k) & set(v)
        if overlap:
            raise VocabularyError(
                f"objects {sorted(overlap)} are both known and novel "
                f"under {name!r}"
            )
        transitions.append(name)
        known[name] = tuple(sorted(k))
        novel[name] = tuple(sorted(v))

    return StateVocabulary(
        mode=mode,
        transitions=tuple(sorted(transitions)),
        known_objects=known,
        novel_objects=novel,
    )


@dataclass(frozen=True)
class AnnotationSet:
    """Ground-truth time ranges (seconds, closed intervals) per state."""

    initial_ranges: tuple[tuple[float, float], ...]
    transitioning_ranges: tuple[tuple[float, float], ...]
    end_ranges: tuple[tuple[float, float], ...]
    duration_s: float

    def __post_init__(self):
        if not math.isfinite(self.duration_s) or self.duration_s <= 0:
            raise AnnotationError("duration must be positive and finite")
        for state, ranges in self.per_state():
            prev_end = None
            for start, end in ranges:
                if not (0.0 <= start <= end <= self.duration_s):
                    raise AnnotationError(
                        f"{state.name.lower()} range [{start}, {end}] outside "
                        f"[0, {self.duration_s}]"
                    )
                if prev_end is not None and start < prev_end:
                    raise AnnotationError(
                        f"{state.name.lower()} ranges overlap or are unsorted"
                    )
                prev_end = end

    def per_state(self):
        yield StateLabel.INITIAL, self.initial_ranges
        yield StateLabel.TRANSITIONING, self.transitioning_ranges
        yield StateLabel.END, self.end_ranges

    def ranges_for(self, state: StateLabel) -> tuple[tuple[float, float], ...]:
        return dict(self.per_state())[state]

    def present_states(self) -> tuple[StateLabel, ...]:
        return tuple(s for s, r in self.per_state() if r)

    @property
    def frame_count(self) -> int:
        return int(math.ceil(self.duration_s))


def make_annotation(initial=(), transitioning=(), end=(), duration_s=0.0) -> AnnotationSet:
    """Convenience constructor from possibly-unsorted list-of-pairs input."""
    def norm(ranges):
        return tuple(sorted((float(s), float(e)) for s, e in ranges))

    return AnnotationSet(norm(initial), norm(transitioning), norm(end),
                         float(duration_s))


def _claimed_frames(start: float, end: float, T: int) -> range:
    # frame t is claimed iff [t, t+1) and [start, end] overlap with positive
    # measure; endpoint touches claim nothing
    lo = max(0, math.floor(start))
    hi = min(T - 1, math.ceil(end) - 1)
    return range(lo, hi + 1)


def labels_from_ranges(annotation: AnnotationSet, T: int) -> np.ndarray:
    """Rasterize annotated ranges onto the 1 fps frame grid.

    Frames not covered by any range are background. Ranges of different
    states must not overlap; when two ranges merely share a boundary inside
    one frame, the later-starting state takes that frame.
    """
    if T != annotation.frame_count:
        raise AnnotationError(
            f"frame count {T} inconsistent with duration "
            f"{annotation.duration_s} (expected {annotation.frame_count})"
        )

    flat = [(start, end, state)
            for state, ranges in annotation.per_state()
            for start, end in ranges]
    for i, (s1, e1, st1) in enumerate(flat):
        for s2, e2, st2 in flat[i + 1:]:
            if st1 != st2 and min(e1, e2) > max(s1, s2):
                raise AnnotationError(
                    f"{st1.name.lower()} range [{s1}, {e1}] overlaps "
                    f"{st2.name.lower()} range [{s2}, {e2}]"
                )

    labels = np.zeros(T, dtype=np.int8)
    claim_start = np.full(T, -np.inf)
    for start, end, state in flat:
        for t in _claimed_frames(start, end, T):
            if start >= claim_start[t]:
                claim_start[t] = start
                labels[t] = int(state)
    return labels


def ranges_from_labels(labels: np.ndarray, duration_s: float) -> AnnotationSet:
    """Rebuild per-state ranges from a label sequence (1-second resolution)."""
    labels = as_label_array(labels)
    ranges = {s: [] for s in STATES_IN_ORDER}
    t = 0
    while t < len(labels):
        code = int(labels[t])
        start = t
        while t < len(labels) and int(labels[t]) == code:
            t += 1
        if code in (int(s) for s in STATES_IN_ORDER):
            ranges[StateLabel(code)].append((float(start), min(float(t), duration_s)))
    return AnnotationSet(
        tuple(ranges[StateLabel.INITIAL]),
        tuple(ranges[StateLabel.TRANSITIONING]),
        tuple(ranges[StateLabel.END]),
        float(duration_s),
    )


@dataclass(frozen=True)
class FeatureSequence:
    """Per-frame embeddings: global features plus optional object-crop features."""

    global_features: np.ndarray
    object_features: np.ndarray | None = None

    def __post_init__(self):
        g = np.asarray(self.global_features, dtype=np.float64)
        if g.ndim != 2 or g.shape[0] < 1:
            raise ValueError("global features must be a T x D array, T >= 1")
        if not np.isfinite(g).all():
            raise ValueError("global features contain non-finite values")
        object.__setattr__(self, "global_features", g)
        if self.object_features is not None:
            o = np.asarray(self.object_features, dtype=np.float64)
            if o.ndim != 2 or o.shape[0] != g.shape[0]:
                raise ValueError("object features must match frame count")
            if not np.isfinite(o).all():
                raise ValueError("object features contain non-finite values")
            object.__setattr__(self, "object_features", o)

    @property
    def frame_count(self) -> int:
        return self.global_features.shape[0]

    def model_input(self) -> np.ndarray:
        """Per-frame classifier input: global features, with object features
        concatenated along the feature axis when present."""
        if self.object_features is None:
            return self.global_features
        return np.concatenate((self.global_features, self.object_features),
                              axis=1)

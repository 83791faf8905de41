"""Sensor streams, windows, windowing and reproducible splits.

A :class:`WindowSet` keeps windows in (stream_id, stream_pos) lexicographic
order; temporal neighborhood construction relies on that ordering, so
subsetting always preserves it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np


@dataclass
class SensorStream:
    """One subject's continuous multi-channel recording."""

    stream_id: str
    subject_id: int
    sample_rate_hz: float
    channel_names: list
    values: np.ndarray          # [C, T] float32
    activity_labels: np.ndarray  # [T] int32

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        self.activity_labels = np.asarray(self.activity_labels, dtype=np.int32)
        if self.sample_rate_hz <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate_hz}")
        if self.values.ndim != 2:
            raise ValueError(f"stream values must be [channels, time], got {self.values.shape}")
        if self.values.shape[1] != self.activity_labels.shape[0]:
            raise ValueError(
                f"stream {self.stream_id}: {self.values.shape[1]} samples but "
                f"{self.activity_labels.shape[0]} labels")

    @property
    def length(self) -> int:
        return self.values.shape[1]


@dataclass
class Window:
    values: np.ndarray  # [C, W] float32
    activity: int
    person: int
    stream_pos: int
    stream_id: str


def majority_label(labels: np.ndarray) -> Optional[int]:
    """Majority per-timestep label; None when no label covers >= 50%.

    Ties resolve to the smaller label id.  Negative labels mark unlabeled
    timesteps and never win.
    """
    valid = labels[labels >= 0]
    if valid.size == 0:
        return None
    counts = np.bincount(valid)
    top = int(counts.argmax())
    if 2 * counts[top] >= labels.size:
        return top
    return None


def segment(stream: SensorStream, window_len: int, step: int,
            label_rule: Callable = majority_label,
            warnings: Optional[list] = None) -> list:
    """Slice a stream into fixed-length windows starting at 0, step, 2*step...

    A trailing partial window is dropped; windows whose label_rule returns
    None are discarded.  A window longer than the stream produces an empty
    result and a warning record.
    """
    if step < 1:
        raise ValueError(f"step must be >= 1, got {step}")
    if window_len > stream.length:
        if warnings is not None:
            warnings.append(
                f"stream {stream.stream_id}: window_len {window_len} exceeds "
                f"length {stream.length}; no windows produced")
        return []
    out = []
    for start in range(0, stream.length - window_len + 1, step):
        label = label_rule(stream.activity_labels[start:start + window_len])
        if label is None:
            continue
        out.append(Window(
            values=stream.values[:, start:start + window_len].copy(),
            activity=int(label),
            person=stream.subject_id,
            stream_pos=start,
            stream_id=stream.stream_id,
        ))
    return out


def downsample(stream: SensorStream, factor: int) -> SensorStream:
    """Keep every factor-th sample of channels and labels."""
    if not isinstance(factor, (int, np.integer)) or factor <= 0:
        raise ValueError(f"downsample factor must be a positive integer, got {factor}")
    if factor == 1:
        return stream
    return SensorStream(
        stream_id=stream.stream_id,
        subject_id=stream.subject_id,
        sample_rate_hz=stream.sample_rate_hz / factor,
        channel_names=list(stream.channel_names),
        values=stream.values[:, ::factor].copy(),
        activity_labels=stream.activity_labels[::factor].copy(),
    )


@dataclass
class WindowSet:
    """Windows in (stream_id, stream_pos) order, stored column-wise."""

    values: np.ndarray       # [N, C, W] float32
    activities: np.ndarray   # [N] int32
    persons: np.ndarray      # [N] int32
    stream_pos: np.ndarray   # [N] int64
    stream_ids: np.ndarray   # [N] unicode
    metadata: dict = field(default_factory=dict)
    source_indices: Optional[np.ndarray] = None  # set on split subsets

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def n_channels(self) -> int:
        return self.values.shape[1]

    @property
    def window_len(self) -> int:
        return self.values.shape[2]

    def window(self, i: int) -> Window:
        return Window(self.values[i], int(self.activities[i]), int(self.persons[i]),
                      int(self.stream_pos[i]), str(self.stream_ids[i]))

    def subset(self, indices) -> "WindowSet":
        """Ordered subset; indices are sorted to preserve stream order."""
        idx = np.sort(np.asarray(indices, dtype=np.int64))
        return WindowSet(
            values=self.values[idx],
            activities=self.activities[idx],
            persons=self.persons[idx],
            stream_pos=self.stream_pos[idx],
            stream_ids=self.stream_ids[idx],
            metadata=dict(self.metadata),
            source_indices=idx,
        )

    def check_ordered(self) -> None:
        keys = list(zip(self.stream_ids.tolist(), self.stream_pos.tolist()))
        if keys != sorted(keys):
            raise ValueError("window set is not in (stream_id, stream_pos) order")


def window_set_from_streams(streams, window_len: int, step: int,
                            label_rule: Callable = majority_label,
                            metadata: Optional[dict] = None,
                            warnings: Optional[list] = None) -> WindowSet:
    """Segment every stream and assemble the ordered WindowSet."""
    if not streams:
        raise ValueError("no streams to window")
    ordered = sorted(streams, key=lambda s: s.stream_id)
    windows = []
    for stream in ordered:
        windows.extend(segment(stream, window_len, step, label_rule, warnings))
    if not windows:
        raise ValueError("windowing produced no windows")
    meta = dict(metadata or {})
    meta.setdefault("window_len", window_len)
    meta.setdefault("step", step)
    meta.setdefault("channel_names", list(ordered[0].channel_names))
    meta.setdefault("sample_rate_hz", ordered[0].sample_rate_hz)
    return WindowSet(
        values=np.stack([w.values for w in windows]).astype(np.float32),
        activities=np.array([w.activity for w in windows], dtype=np.int32),
        persons=np.array([w.person for w in windows], dtype=np.int32),
        stream_pos=np.array([w.stream_pos for w in windows], dtype=np.int64),
        stream_ids=np.array([w.stream_id for w in windows]),
        metadata=meta,
    )


def _largest_remainder(ideal: np.ndarray, total: int) -> np.ndarray:
    """Integer allocation summing to ``total``, each entry within 1 of ideal."""
    base = np.floor(ideal).astype(int)
    remainder = total - base.sum()
    if remainder > 0:
        order = np.argsort(-(ideal - base), kind="stable")
        base[order[:remainder]] += 1
    return base


class Split(NamedTuple):
    train: WindowSet
    val: WindowSet
    test: WindowSet


def stratified_split(ws: WindowSet, fractions=(0.6, 0.2, 0.2), seed: int = 0,
                     by_subject: bool = False) -> Split:
    """Per-activity stratified split into train/val/test.

    Window-wise by default; ``by_subject`` splits whole subjects instead
    (stratification then holds at the subject level only).
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3:
        raise ValueError("fractions must have three entries")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {fractions}")
    rng = np.random.default_rng(seed)

    if by_subject:
        subjects = np.unique(ws.persons)
        if subjects.size < 3:
            raise ValueError(f"subject-wise split needs >= 3 subjects, got {subjects.size}")
        perm = rng.permutation(subjects)
        alloc = _largest_remainder(np.array(fractions) * subjects.size, subjects.size)
        groups, start = [], 0
        for count in alloc:
            groups.append(set(perm[start:start + count].tolist()))
            start += count
        parts = [np.flatnonzero(np.isin(ws.persons, sorted(g))) for g in groups]
    else:
        parts = [[], [], []]
        for cls in np.unique(ws.activities):
            cls_idx = np.flatnonzero(ws.activities == cls)
            if cls_idx.size < 3:
                raise ValueError(
                    f"activity class {int(cls)} has only {cls_idx.size} windows; "
                    f"cannot fill 3 splits")
            alloc = _largest_remainder(np.array(fractions) * cls_idx.size, cls_idx.size)
            shuffled = rng.permutation(cls_idx)
            start = 0
            for i, count in enumerate(alloc):
                parts[i].extend(shuffled[start:start + count].tolist())
                start += count
        parts = [np.array(sorted(p), dtype=np.int64) for p in parts]
    return Split(*(ws.subset(p) for p in parts))


@dataclass
class LabeledSubset:
    """Indices of windows whose labels remain available under a budget."""

    indices: np.ndarray
    fraction: float
    bumped_classes: list = field(default_factory=list)

    def __len__(self) -> int:
        return self.indices.size


def subsample_labels(ws: WindowSet, fraction: float, seed: int = 0) -> LabeledSubset:
    """Stratified label budget of round(fraction * N) windows.

    Every class keeps at least one window when the budget allows; classes
    bumped up from a zero allocation are recorded.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"label fraction must be in (0, 1], got {fraction}")
    n = len(ws)
    if fraction == 1.0:
        return LabeledSubset(np.arange(n, dtype=np.int64), 1.0)
    total = int(round(fraction * n))
    classes = np.unique(ws.activities)
    total = max(total, 1)
    ideal = np.array([fraction * np.sum(ws.activities == c) for c in classes])
    alloc = _largest_remainder(ideal, total)

    bumped = []
    if total >= classes.size:
        # Give starving classes one window, taken from the largest allocations.
        for i in np.argsort(ideal, kind="stable"):
            if alloc[i] == 0:
                donor = int(np.argmax(alloc))
                if alloc[donor] <= 1:
                    break
                alloc[donor] -= 1
                alloc[i] += 1
                bumped.append(int(classes[i]))
    else:
        alloc = np.ones(classes.size, dtype=int)
        bumped = [int(c) for c in classes]

    rng = np.random.default_rng(seed)
    picked = []
    for cls, count in zip(classes, alloc):
        cls_idx = np.flatnonzero(ws.activities == cls)
        take = min(int(count), cls_idx.size)
        picked.extend(rng.permutation(cls_idx)[:take].tolist())
    return LabeledSubset(np.array(sorted(picked), dtype=np.int64), fraction,
                         sorted(set(bumped)))

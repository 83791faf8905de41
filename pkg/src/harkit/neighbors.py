"""Neighborhood systems for the consistency objectives.

Temporal neighborhoods take the windows adjacent in stream order (the
center window included), clipped at stream boundaries so a neighborhood
never mixes streams.  Feature neighborhoods are exact Euclidean k-nearest
neighbors in the handcrafted feature space, excluding the query itself,
with ties broken toward the lower index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data.core import WindowSet
from .features import FeatureSet


@dataclass
class NeighborIndex:
    kind: str                 # "temporal" or "feature"
    lists: list               # per-sample neighbor index arrays
    parameter: int            # radius or k

    def __len__(self) -> int:
        return len(self.lists)


def temporal_neighbors(ws: WindowSet, radius: int) -> NeighborIndex:
    """Indices i-radius .. i+radius within the same stream, including i."""
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    ws.check_ordered()
    n = len(ws)
    ids = ws.stream_ids
    # Start index of each run of equal stream ids.
    run_start = np.zeros(n, dtype=np.int64)
    run_end = np.zeros(n, dtype=np.int64)  # inclusive
    start = 0
    for i in range(1, n + 1):
        if i == n or ids[i] != ids[start]:
            run_start[start:i] = start
            run_end[start:i] = i - 1
            start = i
    lists = []
    for i in range(n):
        lo = max(i - radius, run_start[i])
        hi = min(i + radius, run_end[i])
        lists.append(np.arange(lo, hi + 1, dtype=np.int64))
    return NeighborIndex("temporal", lists, radius)


def feature_knn(fs: FeatureSet, k: int) -> NeighborIndex:
    """Exact k-nearest neighbors per row of the feature matrix."""
    n = len(fs)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k >= n:
        raise ValueError(f"k={k} must be smaller than the number of samples ({n})")
    x = np.asarray(fs.matrix, dtype=np.float64)
    lists = []
    for i in range(n):
        d = np.sqrt(((x - x[i]) ** 2).sum(axis=1))
        d[i] = np.inf  # exclude self
        order = np.argsort(d, kind="stable")  # stable: ties go to lower index
        lists.append(order[:k].astype(np.int64))
    return NeighborIndex("feature", lists, k)

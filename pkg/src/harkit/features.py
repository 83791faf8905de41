"""Handcrafted per-channel window statistics.

Each channel of a window contributes seven order-free statistics: mean,
population variance, standard deviation, median, max, min, interquartile
range.  Quantiles use linear interpolation between order statistics
(type 7), so independent oracles must use the same convention.  These
vectors are the input space of the autoencoder model family and the
metric space for feature-based neighborhoods.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data.core import Window, WindowSet

STAT_NAMES = ("mean", "var", "std", "median", "max", "min", "iqr")
N_STATS = len(STAT_NAMES)


def channel_stats(series: np.ndarray) -> np.ndarray:
    """Seven statistics of one channel, in STAT_NAMES order (float64)."""
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise ValueError(f"channel statistics need a 1-d series of length >= 2, got {x.shape}")
    mean = x.mean()
    var = x.var()  # population form (1/W)
    q1, q3 = np.quantile(x, [0.25, 0.75])  # type-7 linear interpolation
    return np.array([mean, var, np.sqrt(var), np.median(x), x.max(), x.min(), q3 - q1])


@dataclass
class FeatureVector:
    values: np.ndarray  # [C, 7] float64
    source_index: Optional[int] = None

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)


def extract_features(window: Window) -> FeatureVector:
    if window.values.shape[1] < 2:
        raise ValueError(
            f"feature extraction needs window length >= 2, got {window.values.shape[1]}")
    return FeatureVector(np.stack([channel_stats(ch) for ch in window.values]))


@dataclass
class FeatureSet:
    """Feature matrix in the same row order as its source WindowSet."""

    matrix: np.ndarray  # [N, C*7] float64
    column_names: list
    mean: Optional[np.ndarray] = None  # standardization stats, once fitted
    std: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


def extract_feature_set(ws: WindowSet) -> FeatureSet:
    if ws.window_len < 2:
        raise ValueError(f"feature extraction needs window length >= 2, got {ws.window_len}")
    n, c, _ = ws.values.shape
    x64 = ws.values.astype(np.float64)
    mean = x64.mean(axis=2)
    var = x64.var(axis=2)
    q1 = np.quantile(x64, 0.25, axis=2)
    q3 = np.quantile(x64, 0.75, axis=2)
    stats = np.stack([
        mean, var, np.sqrt(var), np.median(x64, axis=2),
        x64.max(axis=2), x64.min(axis=2), q3 - q1,
    ], axis=2)  # [N, C, 7]
    channel_names = ws.metadata.get("channel_names", [f"ch{i}" for i in range(c)])
    columns = [f"{ch}_{stat}" for ch in channel_names for stat in STAT_NAMES]
    return FeatureSet(stats.reshape(n, c * N_STATS), columns,
                      metadata={"n_channels": c})


def fit_standardization(fs: FeatureSet) -> FeatureSet:
    """Compute per-dimension mean/std on a training feature set, in place."""
    fs.mean = fs.matrix.mean(axis=0)
    fs.std = fs.matrix.std(axis=0)
    return fs


def standardize(fs: FeatureSet, stats_source: FeatureSet) -> FeatureSet:
    """Z-score ``fs`` with the source's stats; zero-variance dimensions pass
    through unchanged."""
    if stats_source.mean is None or stats_source.std is None:
        raise ValueError("stats source has not been fitted; call fit_standardization")
    if fs.dim != stats_source.dim:
        raise ValueError(
            f"feature dimension mismatch: {fs.dim} vs stats source {stats_source.dim}")
    keep = stats_source.std == 0
    mean = np.where(keep, 0.0, stats_source.mean)
    std = np.where(keep, 1.0, stats_source.std)
    out = FeatureSet((fs.matrix - mean) / std, list(fs.column_names),
                     metadata=dict(fs.metadata))
    out.mean, out.std = stats_source.mean, stats_source.std
    return out


def export_csv(fs: FeatureSet, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(",".join(fs.column_names) + "\n")
        for row in fs.matrix:
            f.write(",".join(format(v, ".9g") for v in row) + "\n")

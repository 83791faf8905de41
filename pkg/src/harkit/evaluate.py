"""Clustering-based evaluation of learned representations.

Embeddings are clustered with restarted k-means (k-means++ seeding, Lloyd
iterations, best restart by inertia), cluster ids are matched one-to-one
to activity labels by maximizing the contingency diagonal (rectangular
assignment), and accuracy / macro-F1 are computed on the mapped
predictions.  A 2-d projection (PCA or exact t-SNE) supports the scatter
figures.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment


# -- k-means ---------------------------------------------------------------

@dataclass
class KMeansResult:
    assignments: np.ndarray
    centers: np.ndarray
    inertia: float
    inertia_trace: list          # per-Lloyd-iteration inertia of best restart
    restart_inertias: list
    chosen_restart: int


def _sq_distances(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = ((x ** 2).sum(axis=1)[:, None] + (centers ** 2).sum(axis=1)[None, :]
          - 2.0 * x @ centers.T)
    return np.maximum(d2, 0.0)


def _kmeans_pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[i] = x[rng.integers(n)]
            continue
        centers[i] = x[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, ((x - centers[i]) ** 2).sum(axis=1))
    return centers


def kmeans(embeddings, k: int, restarts: int = 10, max_iter: int = 100,
           seed: int = 0) -> KMeansResult:
    """Best-of-restarts Lloyd's algorithm; restart r uses seed + r."""
    x = np.asarray(embeddings, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"embeddings must be [N, H], got {x.shape}")
    n = x.shape[0]
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of points ({n})")

    best = None
    restart_inertias = []
    for r in range(restarts):
        rng = np.random.default_rng(seed + r)
        centers = _kmeans_pp_init(x, k, rng)
        prev = None
        trace = []
        for _ in range(max_iter):
            d2 = _sq_distances(x, centers)
            assign = d2.argmin(axis=1)
            trace.append(float(d2[np.arange(n), assign].sum()))
            # Re-seed empty clusters with the point farthest from its center.
            counts = np.bincount(assign, minlength=k)
            for empty in np.flatnonzero(counts == 0):
                far = int(np.argmax(d2[np.arange(n), assign]))
                centers[empty] = x[far]
                assign[far] = empty
                counts = np.bincount(assign, minlength=k)
            if prev is not None and np.array_equal(assign, prev):
                break
            prev = assign
            for c in range(k):
                centers[c] = x[assign == c].mean(axis=0)
        d2 = _sq_distances(x, centers)
        assign = d2.argmin(axis=1)
        inertia = float(d2[np.arange(n), assign].sum())
        restart_inertias.append(inertia)
        if best is None or inertia < best[0]:
            best = (inertia, assign, centers.copy(), trace, r)

    inertia, assign, centers, trace, chosen = best
    return KMeansResult(assignments=assign, centers=centers, inertia=inertia,
                        inertia_trace=trace, restart_inertias=restart_inertias,
                        chosen_restart=chosen)


# -- cluster-to-label mapping and metrics -----------------------------------

@dataclass
class MappedClustering:
    accuracy: float
    mapping: dict                 # cluster id -> label (or -1 if unmatched)
    mapped_predictions: np.ndarray
    contingency: np.ndarray       # [n_clusters, n_labels]


def cluster_accuracy(assignments, labels) -> MappedClustering:
    """Optimal one-to-one cluster/label matching on the contingency matrix."""
    assignments = np.asarray(assignments, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if assignments.size == 0 or labels.size == 0:
        raise ValueError("cluster accuracy needs non-empty assignments and labels")
    if assignments.shape != labels.shape:
        raise ValueError(
            f"assignments {assignments.shape} and labels {labels.shape} differ")
    clusters = np.unique(assignments)
    classes = np.unique(labels)
    cont = np.zeros((clusters.size, classes.size), dtype=np.int64)
    cidx = {c: i for i, c in enumerate(clusters)}
    lidx = {l: i for i, l in enumerate(classes)}
    for a, l in zip(assignments, labels):
        cont[cidx[a], lidx[l]] += 1
    rows, cols = linear_sum_assignment(-cont)
    mapping = {int(c): -1 for c in clusters}
    for r, c in zip(rows, cols):
        mapping[int(clusters[r])] = int(classes[c])
    matched = int(cont[rows, cols].sum())
    mapped = np.array([mapping[int(a)] for a in assignments], dtype=np.int64)
    return MappedClustering(accuracy=matched / assignments.size, mapping=mapping,
                            mapped_predictions=mapped, contingency=cont)


def macro_f1(mapped_predictions, labels) -> float:
    """Unweighted mean of per-class F1 over the true label set; a class never
    predicted contributes 0."""
    pred = np.asarray(mapped_predictions, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    scores = []
    for cls in np.unique(labels):
        tp = int(np.sum((pred == cls) & (labels == cls)))
        fp = int(np.sum((pred == cls) & (labels != cls)))
        fn = int(np.sum((pred != cls) & (labels == cls)))
        denom = 2 * tp + fp + fn
        scores.append(2 * tp / denom if denom else 0.0)
    return float(np.mean(scores))


@dataclass
class EvalReport:
    accuracy: float
    macro_f1: float
    person_accuracy: Optional[float] = None
    confusion: list = field(default_factory=list)
    mapping: dict = field(default_factory=dict)
    config_hash: str = ""
    n_samples: int = 0

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "person_accuracy": self.person_accuracy,
            "confusion": self.confusion,
            "mapping": {str(k): v for k, v in self.mapping.items()},
            "config_hash": self.config_hash,
            "n_samples": self.n_samples,
        }


def evaluate_embeddings(embeddings, labels, k: Optional[int] = None,
                        restarts: int = 10, seed: int = 0,
                        config_hash: str = "") -> EvalReport:
    """k-means (k = number of label classes by default) + optimal mapping."""
    labels = np.asarray(labels, dtype=np.int64)
    classes = np.unique(labels)
    k = int(k) if k is not None else classes.size
    km = kmeans(embeddings, k, restarts=restarts, seed=seed)
    mc = cluster_accuracy(km.assignments, labels)
    # Confusion over true classes; an extra final column collects windows
    # whose cluster had no matched label (only possible when k != #classes).
    unmapped = bool(np.any(mc.mapped_predictions == -1))
    cols = classes.size + (1 if unmapped else 0)
    confusion = np.zeros((classes.size, cols), dtype=np.int64)
    lidx = {c: i for i, c in enumerate(classes)}
    for p, l in zip(mc.mapped_predictions, labels):
        confusion[lidx[l], lidx.get(p, cols - 1) if p != -1 else cols - 1] += 1
    return EvalReport(
        accuracy=mc.accuracy,
        macro_f1=macro_f1(mc.mapped_predictions, labels),
        confusion=confusion.tolist(),
        mapping=mc.mapping,
        config_hash=config_hash,
        n_samples=int(labels.size),
    )


def person_accuracy(person_embeddings, subject_labels, restarts: int = 10,
                    seed: int = 0) -> float:
    """Cluster the person-representation space with k = number of subjects."""
    subjects = np.asarray(subject_labels, dtype=np.int64)
    s = np.unique(subjects).size
    if s == 1:
        return 1.0
    km = kmeans(person_embeddings, s, restarts=restarts, seed=seed)
    return cluster_accuracy(km.assignments, subjects).accuracy


# -- 2-d projection ----------------------------------------------------------

TSNE_MAX_POINTS = 3000


def pca_2d(embeddings) -> np.ndarray:
    x = np.asarray(embeddings, dtype=np.float64)
    centered = x - x.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    comps = vt[:2]
    # Deterministic sign convention: largest-magnitude loading positive.
    for i in range(comps.shape[0]):
        j = int(np.argmax(np.abs(comps[i])))
        if comps[i, j] < 0:
            comps[i] = -comps[i]
    return centered @ comps.T


def _tsne_joint_probabilities(d2: np.ndarray, perplexity: float) -> np.ndarray:
    n = d2.shape[0]
    target = np.log(perplexity)
    p = np.zeros((n, n))
    for i in range(n):
        row = np.delete(d2[i], i)
        lo, hi = 1e-20, 1e20
        beta = 1.0
        for _ in range(64):
            w = np.exp(-row * beta)
            sw = w.sum()
            if sw <= 0:
                beta /= 2
                continue
            h = np.log(sw) + beta * (row * w).sum() / sw
            if abs(h - target) < 1e-7:
                break
            if h > target:
                lo = beta
                beta = beta * 2 if hi >= 1e20 else (beta + hi) / 2
            else:
                hi = beta
                beta = beta / 2 if lo <= 1e-20 else (beta + lo) / 2
        w = np.exp(-row * beta)
        w /= max(w.sum(), 1e-300)
        p[i, np.arange(n) != i] = w
    p = (p + p.T) / (2.0 * n)
    return np.maximum(p, 1e-12)


def tsne_2d(embeddings, perplexity: float = 30.0, n_iter: int = 1000,
            learning_rate: float = 200.0, seed: int = 0) -> np.ndarray:
    """Exact O(N^2) t-SNE with early exaggeration and momentum."""
    x = np.asarray(embeddings, dtype=np.float64)
    n = x.shape[0]
    if n > TSNE_MAX_POINTS:
        raise ValueError(
            f"exact t-SNE is limited to {TSNE_MAX_POINTS} points, got {n}; "
            f"use method='pca' or subsample first")
    if not 1.0 <= perplexity < n:
        raise ValueError(f"perplexity must be in [1, {n}), got {perplexity}")
    d2 = _sq_distances(x, x)
    p = _tsne_joint_probabilities(d2, perplexity)

    rng = np.random.default_rng(seed)
    y = rng.normal(0.0, 1e-4, size=(n, 2))
    update = np.zeros_like(y)
    gains = np.ones_like(y)
    exaggeration_until = 250
    p_run = p * 12.0
    for it in range(n_iter):
        if it == exaggeration_until:
            p_run = p
        num = 1.0 / (1.0 + _sq_distances(y, y))
        np.fill_diagonal(num, 0.0)
        q = np.maximum(num / num.sum(), 1e-12)
        pq_num = (p_run - q) * num
        grad = 4.0 * ((np.diag(pq_num.sum(axis=1)) - pq_num) @ y)
        momentum = 0.5 if it < exaggeration_until else 0.8
        same_sign = np.sign(grad) == np.sign(update)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        gains = np.maximum(gains, 0.01)
        update = momentum * update - learning_rate * gains * grad
        y = y + update
        y = y - y.mean(axis=0)
    return y


def project_2d(embeddings, method: str = "pca", seed: int = 0,
               perplexity: float = 30.0, n_iter: int = 1000) -> np.ndarray:
    if method == "pca":
        return pca_2d(embeddings)
    if method == "tsne":
        return tsne_2d(embeddings, perplexity=perplexity, n_iter=n_iter, seed=seed)
    raise ValueError(f"unknown projection method {method!r}; use 'pca' or 'tsne'")


# -- SVG scatter --------------------------------------------------------------

_PALETTE = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939",
]


def write_scatter_svg(coords, labels, path, title: str = "") -> None:
    """Minimal deterministic SVG scatter colored by label."""
    coords = np.asarray(coords, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    width, height, pad = 640, 480, 40
    lo = coords.min(axis=0)
    hi = coords.max(axis=0)
    span = np.where(hi - lo == 0, 1.0, hi - lo)

    def sx(v):
        return pad + (v - lo[0]) / span[0] * (width - 2 * pad)

    def sy(v):
        return height - pad - (v - lo[1]) / span[1] * (height - 2 * pad)

    classes = np.unique(labels)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        parts.append(
            f'<text x="{width // 2}" y="20" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14">{title}</text>')
    for (x, y), l in zip(coords, labels):
        color = _PALETTE[int(l) % len(_PALETTE)]
        parts.append(
            f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="{color}" '
            f'fill-opacity="0.75"/>')
    for i, cls in enumerate(classes):
        color = _PALETTE[int(cls) % len(_PALETTE)]
        ly = pad + 16 * i
        parts.append(f'<circle cx="{width - pad - 60}" cy="{ly}" r="4" fill="{color}"/>')
        parts.append(
            f'<text x="{width - pad - 48}" y="{ly + 4}" font-family="sans-serif" '
            f'font-size="12">class {int(cls)}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(parts) + "\n")

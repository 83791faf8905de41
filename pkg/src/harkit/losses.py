"""Differentiable training objectives for all six regimes.

Conventions, fixed across the toolkit:

* reconstruction error is a mean over the batch of per-sample squared
  errors (sum over feature dims);
* contrastive losses are a sum over the batch of per-pair terms
  ``y * D^2/2 + (1-y) * max(0, margin - D)^2 / 2``;
* consistency losses average squared errors over each sample's
  neighborhood and are batch-averaged inside the composite objectives;
* the two composite objectives mix those terms with weights that must
  leave a non-negative share for the reconstruction term.

The mixed sum/mean scales are intentional and absorbed by the Adam
optimizer's per-parameter normalization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn.tensor import ShapeError, Tensor


@dataclass
class LossWeights:
    """Mixing weights.  alpha: temporal consistency, beta: feature
    consistency, gamma: pairwise similarity, margin: contrastive margin."""

    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0
    margin: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.margin <= 0:
            raise ValueError(f"margin must be positive, got {self.margin}")

    def check_self_supervised(self):
        if self.alpha + self.beta > 1.0 + 1e-12:
            raise ValueError(
                f"alpha + beta must be <= 1, got {self.alpha} + {self.beta}")

    def check_weakly_self_supervised(self):
        s = self.alpha + self.beta + self.gamma
        if s > 1.0 + 1e-12:
            raise ValueError(f"alpha + beta + gamma must be <= 1, got {s}")


def _rowwise_sumsq(t: Tensor) -> Tensor:
    """[B, F] -> [B] sum of squares per row."""
    return t.square().sum(axis=1)


def reconstruction_loss(x, recon: Tensor) -> Tensor:
    """Mean over the batch of squared reconstruction errors."""
    x = np.asarray(x)
    if x.shape != recon.data.shape:
        raise ShapeError(
            f"reconstruction loss: input {x.shape} != reconstruction {recon.data.shape}")
    if x.ndim == 1:
        return (recon - x).square().sum()
    return _rowwise_sumsq(recon - x).mean()


def per_sample_reconstruction(x, recon: Tensor) -> Tensor:
    """[B] squared reconstruction error per sample (no batch averaging)."""
    x = np.asarray(x)
    if x.shape != recon.data.shape:
        raise ShapeError(
            f"reconstruction loss: input {x.shape} != reconstruction {recon.data.shape}")
    return _rowwise_sumsq(recon - x)


def similarity_distance(ra: Tensor, rb: Tensor) -> Tensor:
    """Euclidean distance between embeddings; rowwise for 2-d input.

    The gradient at coincident embeddings is defined as zero, so
    downstream contrastive terms stay finite on identical pairs.
    """
    if ra.data.shape != rb.data.shape:
        raise ShapeError(
            f"similarity distance: embedding dims differ, {ra.data.shape} vs {rb.data.shape}")
    single = ra.data.ndim == 1
    delta = ra.data - rb.data if not single else (ra.data - rb.data)[None, :]
    dist = np.sqrt((delta.astype(np.float64) ** 2).sum(axis=1)).astype(ra.data.dtype)
    out = Tensor(dist[0] if single else dist, (ra, rb))

    def backward():
        g = np.atleast_1d(out.grad)
        safe = np.where(dist > 0, dist, 1.0)
        scale = (g / safe) * (dist > 0)
        ddelta = scale[:, None] * delta
        if single:
            ddelta = ddelta[0]
        ra.accumulate_grad(ddelta.astype(ra.data.dtype, copy=False))
        rb.accumulate_grad(-ddelta.astype(rb.data.dtype, copy=False))

    out._backward = backward
    return out


def _check_binary(y, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(y))
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError(f"{name} labels must be 0 or 1, got {np.unique(arr)}")
    return arr.astype(np.float64)


def contrastive_loss(ra: Tensor, rb: Tensor, y, margin: float) -> Tensor:
    """Pull similar pairs together, push dissimilar pairs past the margin.

    Per pair: y * D^2/2 + (1-y) * max(0, margin - D)^2/2, summed over the
    batch.
    """
    if margin <= 0:
        raise ValueError(f"margin must be positive, got {margin}")
    yv = _check_binary(y, "pair")
    d = similarity_distance(ra, rb)
    if d.data.ndim == 0:
        if yv.size != 1:
            raise ShapeError(f"single pair but {yv.size} labels")
        similar = d.square() * 0.5
        dissimilar = (margin - d).relu().square() * 0.5
        return similar * float(yv[0]) + dissimilar * float(1 - yv[0])
    if yv.shape[0] != d.data.shape[0]:
        raise ShapeError(f"{d.data.shape[0]} pairs but {yv.shape[0]} labels")
    similar = d.square() * 0.5
    dissimilar = (margin - d).relu().square() * 0.5
    return (similar * yv + dissimilar * (1.0 - yv)).sum()


def multitask_contrastive(ra_act: Tensor, rb_act: Tensor,
                          ra_pers: Tensor, rb_pers: Tensor,
                          y_act, y_pers,
                          alpha: float, beta: float, margin: float) -> Tensor:
    """Weighted sum of the activity and person contrastive losses."""
    act = contrastive_loss(ra_act, rb_act, y_act, margin)
    pers = contrastive_loss(ra_pers, rb_pers, y_pers, margin)
    return act * alpha + pers * beta


def consistency_loss(recon: Tensor, neighbor_values) -> Tensor:
    """Mean squared error between one reconstruction and its neighbors' inputs.

    recon: [F] (or [1, F]) reconstruction of the center sample.
    neighbor_values: [P, F] inputs of the neighborhood (which may include
    the center sample itself).
    """
    nb = np.asarray(neighbor_values)
    if nb.ndim != 2 or nb.shape[0] < 1:
        raise ValueError(f"neighborhood must be a non-empty [P, F] array, got {nb.shape}")
    flat = recon if recon.data.ndim == 1 else recon.reshape(-1)
    if flat.data.shape[0] != nb.shape[1]:
        raise ShapeError(
            f"consistency loss: reconstruction dim {flat.data.shape[0]} != "
            f"neighbor dim {nb.shape[1]}")
    mu = nb.mean(axis=0)
    offset = float((nb.astype(np.float64) ** 2).sum(axis=1).mean()
                   - (mu.astype(np.float64) ** 2).sum())
    return (flat - mu).square().sum() + max(offset, 0.0)


# The temporal and feature variants share the same functional form; they
# differ only in how the neighborhood was selected.
temporal_consistency_loss = consistency_loss
feature_consistency_loss = consistency_loss


def neighborhood_stats(neighbor_lists, values: np.ndarray):
    """Precompute per-sample (mean, offset) so batched consistency terms
    reduce to ||recon - mean||^2 + offset.

    neighbor_lists: for each sample, indices into ``values``.
    Returns (mu [N, F], offset [N]) in float64.
    """
    values = np.asarray(values, dtype=np.float64)
    n = len(neighbor_lists)
    mu = np.zeros((n, values.shape[1]))
    offset = np.zeros(n)
    for i, idx in enumerate(neighbor_lists):
        if len(idx) == 0:
            raise ValueError(f"sample {i} has an empty neighborhood")
        nb = values[np.asarray(idx)]
        mu[i] = nb.mean(axis=0)
        offset[i] = (nb ** 2).sum(axis=1).mean() - (mu[i] ** 2).sum()
    return mu, np.maximum(offset, 0.0)


def _batched_consistency(recon: Tensor, mu: np.ndarray, offset: np.ndarray) -> Tensor:
    mu = mu.astype(recon.data.dtype, copy=False)
    return _rowwise_sumsq(recon - mu) + offset.astype(recon.data.dtype, copy=False)


def self_supervised_loss(x, recon: Tensor, tc_stats, fc_stats,
                         alpha: float, beta: float) -> Tensor:
    """Composite objective: (1-a-b)*reconstruction + a*temporal + b*feature
    consistency, averaged over the batch.

    tc_stats / fc_stats: (mean, offset) pairs from :func:`neighborhood_stats`,
    already gathered for the rows of this batch.
    """
    LossWeights(alpha=alpha, beta=beta).check_self_supervised()
    ae = per_sample_reconstruction(x, recon)
    per = ae * (1.0 - alpha - beta)
    if alpha > 0:
        per = per + _batched_consistency(recon, *tc_stats) * alpha
    if beta > 0:
        per = per + _batched_consistency(recon, *fc_stats) * beta
    return per.mean()


def self_supervised_components(x, recon: Tensor, tc_stats, fc_stats):
    """Batch-mean value of each component, for logging."""
    ae = float(per_sample_reconstruction(x, recon).mean().data)
    tc = float(_batched_consistency(recon, *tc_stats).mean().data)
    fc = float(_batched_consistency(recon, *fc_stats).mean().data)
    return {"recon": ae, "temporal": tc, "feature": fc}


def weakly_self_supervised_loss(xa, xb, recon_a: Tensor, recon_b: Tensor,
                                tc_a, fc_a, tc_b, fc_b,
                                emb_a: Tensor, emb_b: Tensor, y_act,
                                weights: LossWeights) -> Tensor:
    """Fine-tuning objective over a pair batch.

    Per pair: (1-a-b-g) * (rec_a + rec_b) + a * (tc_a + tc_b)
    + b * (fc_a + fc_b) + g * contrastive(emb_a, emb_b, y), summed over
    the batch.
    """
    weights.check_weakly_self_supervised()
    a, b, g = weights.alpha, weights.beta, weights.gamma
    rec = per_sample_reconstruction(xa, recon_a) + per_sample_reconstruction(xb, recon_b)
    per = rec * (1.0 - a - b - g)
    if a > 0:
        per = per + (_batched_consistency(recon_a, *tc_a)
                     + _batched_consistency(recon_b, *tc_b)) * a
    if b > 0:
        per = per + (_batched_consistency(recon_a, *fc_a)
                     + _batched_consistency(recon_b, *fc_b)) * b
    total = per.sum()
    if g > 0:
        total = total + contrastive_loss(emb_a, emb_b, y_act, weights.margin) * g
    return total


def cross_entropy(logits: Tensor, y) -> Tensor:
    """Mean negative log-likelihood of the true class under softmax(logits).

    Computed via log-sum-exp for stability; the gradient is the usual
    softmax minus one-hot, divided by the batch size.
    """
    if logits.data.ndim != 2:
        raise ShapeError(f"cross entropy expects (batch, classes) logits, got {logits.data.shape}")
    n, m = logits.data.shape
    yv = np.atleast_1d(np.asarray(y, dtype=np.int64))
    if yv.shape[0] != n:
        raise ShapeError(f"{n} logit rows but {yv.shape[0]} labels")
    if yv.min() < 0 or yv.max() >= m:
        raise ValueError(f"class index out of range [0, {m}): {yv.min()}..{yv.max()}")
    z = logits.data.astype(np.float64)
    zmax = z.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
    losses = lse - z[np.arange(n), yv]
    out = Tensor(np.asarray(losses.mean(), dtype=logits.data.dtype), (logits,))

    def backward():
        softmax = np.exp(z - zmax)
        softmax /= softmax.sum(axis=1, keepdims=True)
        softmax[np.arange(n), yv] -= 1.0
        logits.accumulate_grad(
            (float(out.grad) / n) * softmax.astype(logits.data.dtype, copy=False))

    out._backward = backward
    return out

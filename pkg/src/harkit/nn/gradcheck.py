"""Finite-difference verification of analytic gradients.

Central differences with a configurable step compare every parameter
element against the autodiff gradient.  Deviations are reported per
parameter tensor, relative to that tensor's gradient scale
(``max(|analytic|_inf, |fd|_inf, floor)``); elementwise normalization
would amplify O(h^2) truncation noise on near-zero gradient entries into
spurious failures.  Models under check should run in float64 for
numerical headroom; training itself stays in float32.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class GradCheckReport:
    max_rel_error: float
    per_param: dict = field(default_factory=dict)

    def ok(self, tolerance: float) -> bool:
        return self.max_rel_error < tolerance


def grad_check(named_params, loss_fn, h: float = 1e-3,
               denom_floor: float = 1e-6, reseed=None) -> GradCheckReport:
    """Compare analytic gradients of ``loss_fn()`` with central differences.

    named_params: (name, Tensor) pairs; every listed tensor is perturbed
        element by element.
    loss_fn: zero-argument callable re-running the forward pass and
        returning a scalar Tensor.  It must be deterministic; if the model
        draws randomness (dropout), pass ``reseed``, which is invoked
        before every evaluation.
    """
    def evaluate():
        if reseed is not None:
            reseed()
        return loss_fn()

    for _, p in named_params:
        p.zero_grad()
    loss = evaluate()
    loss.backward()
    # Parameters unreachable from the loss carry no grad; treat as zero.
    analytic = {
        name: (np.array(p.grad, copy=True) if p.grad is not None
               else np.zeros_like(p.data))
        for name, p in named_params
    }

    per_param = {}
    worst = 0.0
    for name, p in named_params:
        flat = p.data.reshape(-1)
        a = analytic[name].reshape(-1)
        fd = np.zeros_like(a, dtype=np.float64)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            lp = float(evaluate().data)
            flat[j] = orig - h
            lm = float(evaluate().data)
            flat[j] = orig
            fd[j] = (lp - lm) / (2 * h)
        if flat.size:
            scale = max(np.abs(a).max(), np.abs(fd).max(), denom_floor)
            m = float(np.abs(a - fd).max() / scale)
        else:
            m = 0.0
        per_param[name] = m
        worst = max(worst, m)
    return GradCheckReport(max_rel_error=worst, per_param=per_param)

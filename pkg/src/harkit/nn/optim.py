"""SGD and Adam parameter updates."""

from __future__ import annotations

import numpy as np


class MissingGradientError(RuntimeError):
    """A parameter handed to the optimizer has no populated gradient."""


class SGD:
    def __init__(self, params, learning_rate: float):
        if learning_rate <= 0:
            raise ValueError(f"learning rate must be > 0, got {learning_rate}")
        self.params = [p for _, p in params] if params and isinstance(params[0], tuple) else list(params)
        self.learning_rate = learning_rate
        self.step_count = 0

    def step(self):
        for i, p in enumerate(self.params):
            if p.grad is None:
                raise MissingGradientError(f"parameter {i} has no gradient")
            p.data -= (self.learning_rate * p.grad).astype(p.data.dtype, copy=False)
        self.step_count += 1


class Adam:
    """Adam with bias correction (default betas 0.9/0.999, eps 1e-8)."""

    def __init__(self, params, learning_rate: float = 1e-3,
                 betas=(0.9, 0.999), eps: float = 1e-8):
        if learning_rate <= 0:
            raise ValueError(f"learning rate must be > 0, got {learning_rate}")
        self.params = [p for _, p in params] if params and isinstance(params[0], tuple) else list(params)
        self.learning_rate = learning_rate
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.step_count = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        for i, p in enumerate(self.params):
            if p.grad is None:
                raise MissingGradientError(f"parameter {i} has no gradient")
        self.step_count += 1
        t = self.step_count
        b1, b2 = self.beta1, self.beta2
        for i, p in enumerate(self.params):
            g = p.grad
            self._m[i] = b1 * self._m[i] + (1 - b1) * g
            self._v[i] = b2 * self._v[i] + (1 - b2) * (g * g)
            m_hat = self._m[i] / (1 - b1 ** t)
            v_hat = self._v[i] / (1 - b2 ** t)
            update = self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)
            p.data -= update.astype(p.data.dtype, copy=False)

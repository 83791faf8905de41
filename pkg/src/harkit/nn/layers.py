"""Layers for the temporal-convolution and autoencoder model families.

Every layer implements ``forward(x, train)`` returning a :class:`Tensor`
wired into the autodiff graph.  ``train=False`` is a pure function of the
input: dropout is disabled and batchnorm uses its running statistics.

Layers with structured gradients (conv1d, batchnorm, pooling) register a
custom backward closure rather than composing primitive tensor ops; the
closures are exercised against finite differences in the test suite.
"""

from __future__ import annotations

import numpy as np

from .tensor import ShapeError, Tensor


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int,
                   shape, dtype=np.float32) -> np.ndarray:
    """Uniform init in +/- sqrt(6 / (fan_in + fan_out))."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Layer:
    """Base class: a named parameter/buffer owner with a forward pass."""

    kind = "layer"

    def params(self):
        """(name, Tensor) pairs in declaration order."""
        return []

    def bufs(self):
        """(name, ndarray) pairs for non-trained state (BN running stats)."""
        return []

    def forward(self, x: Tensor, train: bool) -> Tensor:
        raise NotImplementedError

    def __call__(self, x: Tensor, train: bool) -> Tensor:
        return self.forward(x, train)


class Dense(Layer):
    kind = "dense"

    def __init__(self, in_features: int, out_features: int,
                 rng: np.random.Generator, dtype=np.float32):
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Tensor(glorot_uniform(rng, in_features, out_features,
                                            (in_features, out_features), dtype))
        self.bias = Tensor(np.zeros(out_features, dtype=dtype))

    def params(self):
        return [("weight", self.weight), ("bias", self.bias)]

    def forward(self, x: Tensor, train: bool) -> Tensor:
        if x.data.ndim != 2 or x.data.shape[1] != self.in_features:
            raise ShapeError(
                f"dense: expected input (batch, {self.in_features}), "
                f"got {x.data.shape}"
            )
        return x @ self.weight + self.bias


class Conv1d(Layer):
    """1-d convolution, stride 1, optional dilation, 'same' or 'valid' padding."""

    kind = "conv1d"

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 rng: np.random.Generator, dilation: int = 1,
                 padding: str = "same", dtype=np.float32):
        if kernel_size < 1:
            raise ValueError(f"conv1d kernel size must be >= 1, got {kernel_size}")
        if padding not in ("same", "valid"):
            raise ValueError(f"conv1d padding must be 'same' or 'valid', got {padding!r}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.dilation = dilation
        self.padding = padding
        fan_in = in_channels * kernel_size
        fan_out = out_channels * kernel_size
        self.weight = Tensor(glorot_uniform(
            rng, fan_in, fan_out, (out_channels, in_channels, kernel_size), dtype))
        self.bias = Tensor(np.zeros(out_channels, dtype=dtype))

    def params(self):
        return [("weight", self.weight), ("bias", self.bias)]

    def forward(self, x: Tensor, train: bool) -> Tensor:
        if x.data.ndim != 3 or x.data.shape[1] != self.in_channels:
            raise ShapeError(
                f"conv1d: expected input (batch, {self.in_channels}, time), "
                f"got {x.data.shape}"
            )
        b, _, t = x.data.shape
        k, d = self.kernel_size, self.dilation
        span = (k - 1) * d  # receptive field minus one
        if self.padding == "same":
            left = span // 2
            right = span - left
            t_out = t
        else:
            left = right = 0
            t_out = t - span
            if t_out < 1:
                raise ShapeError(
                    f"conv1d: input length {t} shorter than receptive field {span + 1}"
                )
        xp = np.pad(x.data, ((0, 0), (0, 0), (left, right))) if span else x.data
        # patches[b, c, t, j] = xp[b, c, t + j*d]
        patches = np.stack([xp[:, :, j * d:j * d + t_out] for j in range(k)], axis=3)
        cols = patches.transpose(0, 2, 1, 3).reshape(b * t_out, self.in_channels * k)
        w2 = self.weight.data.reshape(self.out_channels, -1)
        out_data = (cols @ w2.T).reshape(b, t_out, self.out_channels)
        out_data = out_data.transpose(0, 2, 1) + self.bias.data[None, :, None]
        out = Tensor(out_data.astype(x.data.dtype, copy=False), (x, self.weight, self.bias))

        weight, bias = self.weight, self.bias

        def backward():
            g = out.grad  # [b, c_out, t_out]
            g2 = g.transpose(0, 2, 1).reshape(b * t_out, self.out_channels)
            weight.accumulate_grad((g2.T @ cols).reshape(weight.data.shape))
            bias.accumulate_grad(g.sum(axis=(0, 2)))
            dcols = g2 @ w2  # [b*t_out, c_in*k]
            dpatch = dcols.reshape(b, t_out, self.in_channels, k).transpose(0, 2, 1, 3)
            dxp = np.zeros((b, self.in_channels, t + span), dtype=g.dtype)
            for j in range(k):
                dxp[:, :, j * d:j * d + t_out] += dpatch[:, :, :, j]
            x.accumulate_grad(dxp[:, :, left:left + t] if span else dxp)

        out._backward = backward
        return out


class BatchNorm1d(Layer):
    """Batch normalization over (batch,) for 2-d or (batch, time) for 3-d input.

    Train mode normalizes with batch statistics (population variance) and
    updates running stats; eval mode uses the running stats and is a pure
    function of the input.
    """

    kind = "batchnorm1d"

    def __init__(self, num_features: int, momentum: float = 0.1,
                 eps: float = 1e-5, dtype=np.float32):
        if eps <= 0:
            raise ValueError(f"batchnorm epsilon must be > 0, got {eps}")
        self.num_features = num_features
        self.momentum = momentum
        self.eps = eps
        self.gamma = Tensor(np.ones(num_features, dtype=dtype))
        self.beta = Tensor(np.zeros(num_features, dtype=dtype))
        self.running_mean = np.zeros(num_features, dtype=dtype)
        self.running_var = np.ones(num_features, dtype=dtype)
        # Fine-tuning on tiny subsets may freeze this so eval-mode stats
        # keep estimating the full-data distribution.
        self.update_running_stats = True

    def params(self):
        return [("gamma", self.gamma), ("beta", self.beta)]

    def bufs(self):
        return [("running_mean", self.running_mean), ("running_var", self.running_var)]

    def _check(self, x: Tensor):
        ok = (x.data.ndim == 2 and x.data.shape[1] == self.num_features) or \
             (x.data.ndim == 3 and x.data.shape[1] == self.num_features)
        if not ok:
            raise ShapeError(
                f"batchnorm1d: expected {self.num_features} features on axis 1, "
                f"got {x.data.shape}"
            )

    def forward(self, x: Tensor, train: bool) -> Tensor:
        self._check(x)
        axes = (0,) if x.data.ndim == 2 else (0, 2)
        expand = (lambda v: v) if x.data.ndim == 2 else (lambda v: v[:, None])
        dtype = x.data.dtype
        gamma, beta = self.gamma, self.beta

        if train:
            # Stats accumulated in float64, applied in the working dtype.
            mu64 = x.data.mean(axis=axes, dtype=np.float64)
            var64 = (np.asarray(x.data, dtype=np.float64) ** 2).mean(axis=axes) - mu64 ** 2
            var64 = np.maximum(var64, 0.0)
            if self.update_running_stats:
                m = self.momentum
                self.running_mean[...] = (1 - m) * self.running_mean + m * mu64
                self.running_var[...] = (1 - m) * self.running_var + m * var64
            mu = mu64.astype(dtype)
            var = var64.astype(dtype)
        else:
            mu = self.running_mean.astype(dtype)
            var = self.running_var.astype(dtype)

        inv_std = 1.0 / np.sqrt(var + np.asarray(self.eps, dtype=dtype))
        xhat = (x.data - expand(mu)) * expand(inv_std)
        out_data = expand(gamma.data) * xhat + expand(beta.data)
        out = Tensor(out_data, (x, gamma, beta))

        n_reduced = x.data.shape[0] if x.data.ndim == 2 else x.data.shape[0] * x.data.shape[2]

        def backward():
            g = out.grad
            gamma.accumulate_grad((g * xhat).sum(axis=axes))
            beta.accumulate_grad(g.sum(axis=axes))
            dxhat = g * expand(gamma.data)
            if train:
                term = (n_reduced * dxhat
                        - expand(dxhat.sum(axis=axes))
                        - xhat * expand((dxhat * xhat).sum(axis=axes)))
                x.accumulate_grad(expand(inv_std) * term / n_reduced)
            else:
                x.accumulate_grad(dxhat * expand(inv_std))

        out._backward = backward
        return out


class ReLU(Layer):
    kind = "relu"

    def forward(self, x: Tensor, train: bool) -> Tensor:
        return x.relu()


class MaxPool1d(Layer):
    """Temporal max pooling with non-overlapping windows; a trailing partial
    window is dropped."""

    kind = "maxpool1d"

    def __init__(self, width: int):
        if width < 1:
            raise ValueError(f"maxpool width must be >= 1, got {width}")
        self.width = width

    def forward(self, x: Tensor, train: bool) -> Tensor:
        if x.data.ndim != 3:
            raise ShapeError(f"maxpool1d: expected (batch, channels, time), got {x.data.shape}")
        b, c, t = x.data.shape
        w = self.width
        t_out = t // w
        if t_out < 1:
            raise ShapeError(f"maxpool1d: input length {t} shorter than pool width {w}")
        win = x.data[:, :, :t_out * w].reshape(b, c, t_out, w)
        idx = win.argmax(axis=3)
        out = Tensor(np.take_along_axis(win, idx[..., None], axis=3)[..., 0], (x,))

        def backward():
            dwin = np.zeros((b, c, t_out, w), dtype=out.grad.dtype)
            np.put_along_axis(dwin, idx[..., None], out.grad[..., None], axis=3)
            dx = np.zeros((b, c, t), dtype=out.grad.dtype)
            dx[:, :, :t_out * w] = dwin.reshape(b, c, t_out * w)
            x.accumulate_grad(dx)

        out._backward = backward
        return out


class Dropout(Layer):
    """Inverted dropout; identity in eval mode."""

    kind = "dropout"

    def __init__(self, rate: float, rng: np.random.Generator):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.rng = rng

    def forward(self, x: Tensor, train: bool) -> Tensor:
        if not train or self.rate == 0.0:
            return x
        keep = 1.0 - self.rate
        mask = (self.rng.random(x.data.shape) < keep).astype(x.data.dtype) / keep
        out = Tensor(x.data * mask, (x,))

        def backward():
            x.accumulate_grad(out.grad * mask)

        out._backward = backward
        return out


class GlobalMaxPool(Layer):
    """Max over the time axis: (batch, channels, time) -> (batch, channels)."""

    kind = "globalmaxpool"

    def forward(self, x: Tensor, train: bool) -> Tensor:
        if x.data.ndim != 3:
            raise ShapeError(
                f"globalmaxpool: expected (batch, channels, time), got {x.data.shape}"
            )
        idx = x.data.argmax(axis=2)
        out = Tensor(np.take_along_axis(x.data, idx[..., None], axis=2)[..., 0], (x,))

        def backward():
            dx = np.zeros_like(x.data, dtype=out.grad.dtype)
            np.put_along_axis(dx, idx[..., None], out.grad[..., None], axis=2)
            x.accumulate_grad(dx)

        out._backward = backward
        return out


class Module:
    """A named tree of layers and sub-modules with deterministic state order.

    Declaration order defines checkpoint block order, so children must be
    registered with :meth:`add` in ``__init__``.
    """

    def __init__(self):
        self._children: list[tuple[str, object]] = []

    def add(self, name: str, child):
        self._children.append((name, child))
        setattr(self, name, child)
        return child

    def parameters(self) -> list[tuple[str, Tensor]]:
        out = []
        for name, child in self._children:
            if isinstance(child, Module):
                out.extend((f"{name}.{n}", p) for n, p in child.parameters())
            else:
                out.extend((f"{name}.{n}", p) for n, p in child.params())
        return out

    def buffers(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for name, child in self._children:
            if isinstance(child, Module):
                out.extend((f"{name}.{n}", b) for n, b in child.buffers())
            else:
                out.extend((f"{name}.{n}", b) for n, b in child.bufs())
        return out

    def zero_grad(self):
        for _, p in self.parameters():
            p.zero_grad()

    def seed_rng(self, seed: int):
        """Point every stochastic layer at one fresh generator."""
        rng = np.random.default_rng(seed)
        for layer in self._walk_layers():
            if isinstance(layer, Dropout):
                layer.rng = rng
        return rng

    def freeze_batchnorm_running_stats(self):
        """Stop running-stat updates; batch stats still normalize in train
        mode.  Used when fine-tuning on a subset too small to re-estimate
        population statistics."""
        for layer in self._walk_layers():
            if isinstance(layer, BatchNorm1d):
                layer.update_running_stats = False

    def _walk_layers(self):
        for _, child in self._children:
            if isinstance(child, Module):
                yield from child._walk_layers()
            else:
                yield child

"""Reverse-mode automatic differentiation on numpy arrays.

A ``Tensor`` wraps an ndarray and records the operation that produced it.
Calling :meth:`Tensor.backward` on a scalar result walks the recorded graph
in reverse topological order and accumulates gradients into every tensor
that contributed, so trainable parameters end up with populated ``.grad``
arrays.

The op set is deliberately small: elementwise arithmetic, matmul, ReLU and
reductions cover the dense/convolutional layers built on top (layers with
structured backward rules, such as conv1d or batchnorm, build their own
backward closures in :mod:`harkit.nn.layers`).
"""

from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible for an operation."""


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape``, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    # Sum away leading dims that were added by broadcasting.
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    # Sum over dims that were broadcast from size 1.
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    """An ndarray plus the bookkeeping needed for reverse-mode autodiff."""

    __slots__ = ("data", "grad", "_backward", "_prev")

    def __init__(self, data, prev=()):
        self.data = np.asarray(data)
        self.grad = None
        self._backward = None
        self._prev = tuple(prev)

    # -- graph plumbing --------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Populate ``.grad`` on every tensor reachable from this scalar."""
        if self.data.size != 1:
            raise ShapeError(
                f"backward() requires a scalar loss, got shape {self.data.shape}"
            )
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for child in node._prev:
                if id(child) not in visited:
                    stack.append((child, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward()

    # -- arithmetic ------------------------------------------------------

    def __add__(self, other):
        other = as_tensor(other, like=self)
        out = Tensor(self.data + other.data, (self, other))

        def backward():
            self.accumulate_grad(_unbroadcast(out.grad, self.data.shape))
            other.accumulate_grad(_unbroadcast(out.grad, other.data.shape))

        out._backward = backward
        return out

    def __mul__(self, other):
        other = as_tensor(other, like=self)
        out = Tensor(self.data * other.data, (self, other))

        def backward():
            self.accumulate_grad(_unbroadcast(out.grad * other.data, self.data.shape))
            other.accumulate_grad(_unbroadcast(out.grad * self.data, other.data.shape))

        out._backward = backward
        return out

    def __sub__(self, other):
        other = as_tensor(other, like=self)
        out = Tensor(self.data - other.data, (self, other))

        def backward():
            self.accumulate_grad(_unbroadcast(out.grad, self.data.shape))
            other.accumulate_grad(_unbroadcast(-out.grad, other.data.shape))

        out._backward = backward
        return out

    def __neg__(self):
        out = Tensor(-self.data, (self,))

        def backward():
            self.accumulate_grad(-out.grad)

        out._backward = backward
        return out

    __radd__ = __add__
    __rmul__ = __mul__

    def __rsub__(self, other):
        return as_tensor(other, like=self) - self

    def __truediv__(self, scalar):
        if isinstance(scalar, Tensor):
            raise TypeError("tensor/tensor division is not supported")
        return self * (1.0 / float(scalar))

    def __matmul__(self, other):
        if not isinstance(other, Tensor):
            other = as_tensor(other, like=self)
        if self.data.ndim != 2 or other.data.ndim != 2:
            raise ShapeError(
                f"matmul expects 2-d operands, got {self.data.shape} @ {other.data.shape}"
            )
        if self.data.shape[1] != other.data.shape[0]:
            raise ShapeError(
                f"matmul inner dims differ: {self.data.shape} @ {other.data.shape}"
            )
        out = Tensor(self.data @ other.data, (self, other))

        def backward():
            self.accumulate_grad(out.grad @ other.data.T)
            other.accumulate_grad(self.data.T @ out.grad)

        out._backward = backward
        return out

    # -- nonlinearities and reductions ------------------------------------

    def relu(self):
        out = Tensor(np.maximum(self.data, 0), (self,))

        def backward():
            self.accumulate_grad(out.grad * (self.data > 0))

        out._backward = backward
        return out

    def square(self):
        out = Tensor(self.data * self.data, (self,))

        def backward():
            self.accumulate_grad(out.grad * 2.0 * self.data)

        out._backward = backward
        return out

    def sum(self, axis=None):
        out = Tensor(self.data.sum(axis=axis, keepdims=False), (self,))

        def backward():
            g = out.grad
            if axis is not None:
                g = np.expand_dims(g, axis)
            self.accumulate_grad(np.broadcast_to(g, self.data.shape).copy())

        out._backward = backward
        return out

    def mean(self, axis=None):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis) * (1.0 / n)

    def reshape(self, *shape):
        out = Tensor(self.data.reshape(*shape), (self,))

        def backward():
            self.accumulate_grad(out.grad.reshape(self.data.shape))

        out._backward = backward
        return out

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype})"


def as_tensor(value, like: Tensor | None = None) -> Tensor:
    """Wrap a constant as a leaf tensor, matching ``like``'s dtype if given."""
    if isinstance(value, Tensor):
        return value
    dtype = like.data.dtype if like is not None else None
    return Tensor(np.asarray(value, dtype=dtype))

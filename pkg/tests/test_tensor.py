"""Autodiff primitive ops: values and gradients."""

import numpy as np
import pytest

from harkit.nn import ShapeError, Tensor


def test_relu_values():
    x = Tensor(np.array([-1.0, 0.0, 2.0]))
    assert np.array_equal(x.relu().data, [0.0, 0.0, 2.0])


def test_backward_linear():
    # loss = sum(w * x) -> dL/dw = x
    x = np.array([1.0, 2.0, 3.0])
    w = Tensor(np.array([0.5, -1.0, 2.0]))
    loss = (w * x).sum()
    loss.backward()
    assert np.allclose(w.grad, x)


def test_backward_quadratic():
    # loss = 0.5 * ||w||^2 -> grad = w
    w = Tensor(np.array([3.0, 4.0]))
    loss = w.square().sum() * 0.5
    loss.backward()
    assert np.allclose(w.grad, [3.0, 4.0])


def test_backward_requires_scalar():
    w = Tensor(np.array([1.0, 2.0]))
    with pytest.raises(ShapeError):
        (w * 2.0).backward()


def test_matmul_shape_error():
    a = Tensor(np.zeros((2, 3)))
    b = Tensor(np.zeros((4, 2)))
    with pytest.raises(ShapeError):
        a @ b


def test_grad_accumulates_across_uses():
    w = Tensor(np.array([2.0]))
    loss = (w * 3.0 + w * w).sum()  # d/dw = 3 + 2w = 7
    loss.backward()
    assert np.allclose(w.grad, [7.0])


def test_broadcast_add_bias_grad():
    x = Tensor(np.ones((4, 3)))
    b = Tensor(np.array([1.0, 2.0, 3.0]))
    loss = (x + b).sum()
    loss.backward()
    assert np.allclose(b.grad, [4.0, 4.0, 4.0])
    assert np.allclose(x.grad, np.ones((4, 3)))


def test_mean_and_axis_sum():
    x = Tensor(np.arange(6, dtype=np.float64).reshape(2, 3))
    assert np.allclose(x.mean().data, 2.5)
    s = x.sum(axis=0)
    assert np.allclose(s.data, [3.0, 5.0, 7.0])
    s.sum().backward()
    assert np.allclose(x.grad, np.ones((2, 3)))


def _fd_grad(make_loss, param, h=1e-6):
    flat = param.data.reshape(-1)
    g = np.zeros_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        lp = float(make_loss().data)
        flat[i] = orig - h
        lm = float(make_loss().data)
        flat[i] = orig
        g[i] = (lp - lm) / (2 * h)
    return g.reshape(param.data.shape)


@pytest.mark.parametrize("seed", range(5))
def test_composite_graph_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    w1 = Tensor(rng.normal(size=(4, 3)))
    w2 = Tensor(rng.normal(size=(3, 2)))
    x = rng.normal(size=(5, 4))

    def make_loss():
        h = (Tensor(x) @ w1).relu()
        out = h @ w2
        return (out.square().mean() + out.sum() * 0.1)

    loss = make_loss()
    loss.backward()
    for p in (w1, w2):
        fd = _fd_grad(make_loss, p)
        assert np.allclose(p.grad, fd, rtol=1e-4, atol=1e-6)

"""Optimizer update rules against hand-computed steps."""

import numpy as np
import pytest

from harkit.nn import Adam, MissingGradientError, SGD, Tensor


def test_sgd_single_step():
    w = Tensor(np.array([1.0]))
    w.grad = np.array([2.0])
    SGD([w], learning_rate=0.1).step()
    assert np.allclose(w.data, [0.8])


def test_sgd_zero_gradient_is_identity():
    w = Tensor(np.array([1.5, -2.0]))
    w.grad = np.zeros(2)
    SGD([w], learning_rate=0.5).step()
    assert np.array_equal(w.data, [1.5, -2.0])


def test_adam_first_step_matches_hand_evaluation():
    # t=1, g=1: m_hat=1, v_hat=1, delta = -lr * 1/(1+eps) ~ -1e-3
    w = Tensor(np.array([0.0]))
    w.grad = np.array([1.0])
    Adam([w], learning_rate=1e-3).step()
    expected = -1e-3 / (1.0 + 1e-8)
    assert np.allclose(w.data, [expected], rtol=1e-10)


def test_adam_step_counter_and_missing_grad():
    w = Tensor(np.array([0.0]))
    opt = Adam([w])
    with pytest.raises(MissingGradientError):
        opt.step()
    assert opt.step_count == 0
    w.grad = np.array([1.0])
    opt.step()
    assert opt.step_count == 1


def test_invalid_learning_rate():
    w = Tensor(np.array([0.0]))
    with pytest.raises(ValueError):
        SGD([w], learning_rate=0.0)
    with pytest.raises(ValueError):
        Adam([w], learning_rate=-1.0)


def test_named_param_lists_accepted():
    w = Tensor(np.array([1.0]))
    w.grad = np.array([1.0])
    SGD([("layer.weight", w)], learning_rate=0.5).step()
    assert np.allclose(w.data, [0.5])

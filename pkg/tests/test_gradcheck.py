"""Gradient-check harness behavior."""

import numpy as np
import pytest

from harkit import losses
from harkit.models import ResidualAutoencoder, SiameseResidualAutoencoder, TcnEncoder
from harkit.nn import Dense, Dropout, Module, Tensor, grad_check


def test_residual_autoencoder_reconstruction_gradients():
    rng = np.random.default_rng(42)
    ae = ResidualAutoencoder(6, hidden_sizes=(10, 8, 6, 5), seed=7, dtype=np.float64)
    x = rng.normal(size=(8, 6))

    def loss_fn():
        recon, _ = ae.reconstruct(Tensor(x), train=True)
        return losses.reconstruction_loss(x, recon)

    assert grad_check(ae.parameters(), loss_fn, h=5e-4).max_rel_error < 1e-3


def test_contrastive_positive_pair_through_siamese():
    rng = np.random.default_rng(11)
    siam = SiameseResidualAutoencoder(
        ResidualAutoencoder(4, hidden_sizes=(6, 4), seed=11, dtype=np.float64))
    xa, xb = rng.normal(size=(2, 1, 4))

    def loss_fn():
        za, zb, _, _ = siam.forward_pair(Tensor(xa), Tensor(xb), train=True)
        return losses.contrastive_loss(za, zb, 1, 1.0)

    assert grad_check(siam.parameters(), loss_fn).max_rel_error < 1e-3


def test_random_small_network_default_step():
    # Random dense network checked at the default h=1e-3.
    rng = np.random.default_rng(3)

    class Net(Module):
        def __init__(self):
            super().__init__()
            r = np.random.default_rng(3)
            self.add("fc1", Dense(5, 7, r, dtype=np.float64))
            self.add("fc2", Dense(7, 2, r, dtype=np.float64))

    net = Net()
    x = rng.normal(size=(6, 5))

    def loss_fn():
        h = net.fc1(Tensor(x), True).relu()
        return net.fc2(h, True).square().mean()

    report = grad_check(net.parameters(), loss_fn, h=1e-3)
    assert report.max_rel_error < 1e-3


def test_constant_output_model_has_zero_gradients():
    class Const(Module):
        def __init__(self):
            super().__init__()
            self.add("fc", Dense(3, 2, np.random.default_rng(0), dtype=np.float64))

    model = Const()

    def loss_fn():
        # Loss ignores the model entirely.
        return Tensor(np.zeros(())) + 1.0

    report = grad_check(model.parameters(), loss_fn)
    assert report.max_rel_error == 0.0
    assert all(v == 0.0 for v in report.per_param.values())


def test_dropout_model_with_reseed():
    rng = np.random.default_rng(9)

    class Net(Module):
        def __init__(self):
            super().__init__()
            r = np.random.default_rng(9)
            self.add("fc", Dense(4, 4, r, dtype=np.float64))
            self.add("drop", Dropout(0.5, r))

    net = Net()
    x = rng.normal(size=(5, 4))

    def loss_fn():
        return net.drop(net.fc(Tensor(x), True), True).square().sum()

    report = grad_check(net.parameters(), loss_fn,
                        reseed=lambda: net.seed_rng(123))
    assert report.max_rel_error < 1e-3


def test_tcn_encoder_embedding_gradients():
    rng = np.random.default_rng(21)
    enc = TcnEncoder(2, n_blocks=2, convs_per_block=2, filters=4, embed_dim=3,
                     dropout=0.0, seed=21, dtype=np.float64)
    x = rng.normal(size=(3, 2, 10))

    def loss_fn():
        return enc.encode(Tensor(x), train=True).square().mean()

    assert grad_check(enc.parameters(), loss_fn, h=5e-4).max_rel_error < 1e-3

"""Network architectures for the six training regimes.

Two families share all experiments: a temporal-convolutional encoder for
raw windows (supervised classifier and Siamese metric learners) and a
residual MLP autoencoder for handcrafted feature vectors (unsupervised,
self-supervised and weakly self-supervised training).  Siamese variants
apply one underlying module to both inputs, so weight sharing holds by
construction.
"""

from __future__ import annotations

import numpy as np

from .nn.checkpoint import CheckpointError, load_checkpoint, restore_state, save_checkpoint
from .nn.layers import (
    BatchNorm1d,
    Conv1d,
    Dense,
    Dropout,
    GlobalMaxPool,
    MaxPool1d,
    Module,
    ReLU,
)
from .nn.tensor import Tensor

EMBED_DIM = 96


def _as_dtype(name_or_dtype):
    return np.dtype(name_or_dtype)


class ResidualAutoencoder(Module):
    """Residual MLP autoencoder over feature vectors.

    Encoder: dense/batchnorm/ReLU stages with decreasing widths, plus a
    linear projection of the input added to the final stage (the residual
    path).  Decoder: plain dense/ReLU stages back up to the input width.
    """

    kind = "residual_autoencoder"

    def __init__(self, input_dim: int, hidden_sizes=(256, 256, 128, 96),
                 seed: int = 0, dtype=np.float32):
        super().__init__()
        dtype = _as_dtype(dtype)
        self.input_dim = input_dim
        self.hidden_sizes = tuple(int(h) for h in hidden_sizes)
        self.latent_dim = self.hidden_sizes[-1]
        self.seed = seed
        self.dtype = dtype
        rng = np.random.default_rng(seed)

        self.enc_stages = []
        prev = input_dim
        for i, width in enumerate(self.hidden_sizes):
            dense = self.add(f"enc{i}_dense", Dense(prev, width, rng, dtype))
            bn = self.add(f"enc{i}_bn", BatchNorm1d(width, dtype=dtype))
            self.enc_stages.append((dense, bn))
            prev = width
        self.add("skip", Dense(input_dim, self.latent_dim, rng, dtype))

        self.dec_stages = []
        widths = tuple(reversed(self.hidden_sizes[:-1]))
        prev = self.latent_dim
        for i, width in enumerate(widths):
            self.dec_stages.append(self.add(f"dec{i}_dense", Dense(prev, width, rng, dtype)))
            prev = width
        self.add("dec_out", Dense(prev, input_dim, rng, dtype))
        self._relu = ReLU()

    def encode(self, x: Tensor, train: bool) -> Tensor:
        h = x
        for dense, bn in self.enc_stages:
            h = self._relu(bn(dense(h, train), train), train)
        return h + self.skip(x, train)

    def decode(self, z: Tensor, train: bool) -> Tensor:
        h = z
        for dense in self.dec_stages:
            h = self._relu(dense(h, train), train)
        return self.dec_out(h, train)

    def reconstruct(self, x: Tensor, train: bool):
        """Returns (reconstruction, latent)."""
        z = self.encode(x, train)
        return self.decode(z, train), z

    def architecture(self) -> dict:
        return {
            "kind": self.kind,
            "input_dim": self.input_dim,
            "hidden_sizes": list(self.hidden_sizes),
            "seed": self.seed,
            "dtype": self.dtype.name,
        }


class TcnEncoder(Module):
    """Stacked temporal-convolution blocks with in-block residual paths.

    Each block applies `convs_per_block` dilated convolutions (kernel 3 by
    default), every one followed by batchnorm, ReLU and dropout, then adds
    the block input (through a width-matching 1x1 convolution when channel
    counts differ).  A global temporal max pool and a dense projection
    produce the fixed-width embedding.
    """

    kind = "tcn_encoder"

    def __init__(self, in_channels: int, n_blocks: int = 3, convs_per_block: int = 3,
                 filters: int = 128, kernel_size: int = 3, dilations=(1, 2, 4),
                 dropout: float = 0.1, embed_dim: int = EMBED_DIM,
                 intermediate_pool: int = 0, seed: int = 0, dtype=np.float32):
        super().__init__()
        dtype = _as_dtype(dtype)
        self.config = {
            "in_channels": in_channels, "n_blocks": n_blocks,
            "convs_per_block": convs_per_block, "filters": filters,
            "kernel_size": kernel_size, "dilations": list(dilations),
            "dropout": dropout, "embed_dim": embed_dim,
            "intermediate_pool": intermediate_pool,
        }
        self.seed = seed
        self.dtype = dtype
        rng = np.random.default_rng(seed)

        self.blocks = []
        prev = in_channels
        for b in range(n_blocks):
            stages = []
            ch = prev
            for j in range(convs_per_block):
                conv = self.add(f"b{b}c{j}_conv", Conv1d(
                    ch, filters, kernel_size, rng,
                    dilation=dilations[j % len(dilations)], padding="same", dtype=dtype))
                bn = self.add(f"b{b}c{j}_bn", BatchNorm1d(filters, dtype=dtype))
                drop = self.add(f"b{b}c{j}_drop", Dropout(dropout, rng))
                stages.append((conv, bn, drop))
                ch = filters
            if prev != filters:
                skip = self.add(f"b{b}_skip", Conv1d(prev, filters, 1, rng,
                                                     padding="same", dtype=dtype))
            else:
                skip = None
            self.blocks.append((stages, skip))
            prev = filters
        self._relu = ReLU()
        self._gpool = GlobalMaxPool()
        self._mid_pool = MaxPool1d(intermediate_pool) if intermediate_pool > 0 else None
        self.add("project", Dense(filters, embed_dim, rng, dtype))

    def encode(self, x: Tensor, train: bool) -> Tensor:
        h = x
        for b, (stages, skip) in enumerate(self.blocks):
            block_in = h
            for conv, bn, drop in stages:
                h = drop(self._relu(bn(conv(h, train), train), train), train)
            h = h + (skip(block_in, train) if skip is not None else block_in)
            if self._mid_pool is not None and (b + 1) % 2 == 0 and b + 1 < len(self.blocks):
                h = self._mid_pool(h, train)
        return self.project(self._gpool(h, train), train)

    def architecture(self) -> dict:
        return {"kind": self.kind, "seed": self.seed, "dtype": self.dtype.name,
                **self.config}


class SupervisedTcn(Module):
    """Temporal-convolutional classifier: encoder plus a logits layer."""

    kind = "supervised_tcn"

    def __init__(self, in_channels: int, n_classes: int, seed: int = 0,
                 dtype=np.float32, **tcn_kwargs):
        super().__init__()
        dtype = _as_dtype(dtype)
        self.n_classes = n_classes
        self.seed = seed
        self.dtype = dtype
        self.add("encoder", TcnEncoder(in_channels, seed=seed, dtype=dtype, **tcn_kwargs))
        rng = np.random.default_rng(seed + 1)
        self.add("classifier", Dense(self.encoder.config["embed_dim"], n_classes, rng, dtype))

    def forward(self, x: Tensor, train: bool) -> Tensor:
        return self.classifier(self.encoder.encode(x, train), train)

    def encode(self, x: Tensor, train: bool) -> Tensor:
        return self.encoder.encode(x, train)

    def architecture(self) -> dict:
        return {"kind": self.kind, "n_classes": self.n_classes, "seed": self.seed,
                "dtype": self.dtype.name,
                "tcn": {k: v for k, v in self.encoder.config.items() if k != "in_channels"},
                "in_channels": self.encoder.config["in_channels"]}


class SiameseTcn(Module):
    """Weight-shared pair encoder; optional per-task heads.

    Single-task: both branches are the shared encoder itself.  Multi-task:
    a dense activity head and a dense person head sit on the shared
    encoder, giving two representation spaces per branch.
    """

    kind = "siamese_tcn"

    def __init__(self, in_channels: int, multi_task: bool = False, seed: int = 0,
                 dtype=np.float32, **tcn_kwargs):
        super().__init__()
        dtype = _as_dtype(dtype)
        self.multi_task = multi_task
        self.seed = seed
        self.dtype = dtype
        self.add("encoder", TcnEncoder(in_channels, seed=seed, dtype=dtype, **tcn_kwargs))
        embed = self.encoder.config["embed_dim"]
        if multi_task:
            rng = np.random.default_rng(seed + 1)
            self.add("act_head", Dense(embed, embed, rng, dtype))
            self.add("pers_head", Dense(embed, embed, rng, dtype))

    def encode(self, x: Tensor, train: bool) -> Tensor:
        h = self.encoder.encode(x, train)
        if self.multi_task:
            return self.act_head(h, train)
        return h

    def encode_person(self, x: Tensor, train: bool) -> Tensor:
        if not self.multi_task:
            raise ValueError("person representations require a multi-task model")
        return self.pers_head(self.encoder.encode(x, train), train)

    def forward_pair(self, xa: Tensor, xb: Tensor, train: bool):
        """Single-task: (emb_a, emb_b).  Multi-task: adds person embeddings
        as ((act_a, act_b), (pers_a, pers_b))."""
        ha = self.encoder.encode(xa, train)
        hb = self.encoder.encode(xb, train)
        if not self.multi_task:
            return ha, hb
        return ((self.act_head(ha, train), self.act_head(hb, train)),
                (self.pers_head(ha, train), self.pers_head(hb, train)))

    def architecture(self) -> dict:
        return {"kind": self.kind, "multi_task": self.multi_task, "seed": self.seed,
                "dtype": self.dtype.name,
                "tcn": {k: v for k, v in self.encoder.config.items() if k != "in_channels"},
                "in_channels": self.encoder.config["in_channels"]}


class SiameseResidualAutoencoder(Module):
    """Two weight-shared autoencoder branches for pairwise fine-tuning.

    The single wrapped autoencoder is applied to both pair members;
    contrastive terms act on the latents while both decoders keep
    reconstructing their inputs.
    """

    kind = "siamese_residual_autoencoder"

    def __init__(self, autoencoder: ResidualAutoencoder):
        super().__init__()
        self.add("ae", autoencoder)
        self.seed = autoencoder.seed
        self.dtype = autoencoder.dtype

    def encode(self, x: Tensor, train: bool) -> Tensor:
        return self.ae.encode(x, train)

    def forward_pair(self, xa: Tensor, xb: Tensor, train: bool):
        """Returns (latent_a, latent_b, recon_a, recon_b)."""
        za = self.ae.encode(xa, train)
        zb = self.ae.encode(xb, train)
        return za, zb, self.ae.decode(za, train), self.ae.decode(zb, train)

    def architecture(self) -> dict:
        return {"kind": self.kind, "ae": self.ae.architecture()}


def parameter_count(model: Module) -> int:
    return sum(p.data.size for _, p in model.parameters())


def build_model(arch: dict) -> Module:
    """Instantiate a model from a checkpoint's architecture description."""
    kind = arch.get("kind")
    if kind == ResidualAutoencoder.kind:
        return ResidualAutoencoder(arch["input_dim"], arch["hidden_sizes"],
                                   seed=arch.get("seed", 0), dtype=arch.get("dtype", "float32"))
    if kind == TcnEncoder.kind:
        cfg = {k: v for k, v in arch.items() if k not in ("kind", "seed", "dtype")}
        return TcnEncoder(seed=arch.get("seed", 0), dtype=arch.get("dtype", "float32"), **cfg)
    if kind == SupervisedTcn.kind:
        return SupervisedTcn(arch["in_channels"], arch["n_classes"], seed=arch.get("seed", 0),
                             dtype=arch.get("dtype", "float32"), **arch.get("tcn", {}))
    if kind == SiameseTcn.kind:
        return SiameseTcn(arch["in_channels"], multi_task=arch.get("multi_task", False),
                          seed=arch.get("seed", 0), dtype=arch.get("dtype", "float32"),
                          **arch.get("tcn", {}))
    if kind == SiameseResidualAutoencoder.kind:
        return SiameseResidualAutoencoder(build_model(arch["ae"]))
    raise CheckpointError(f"unknown architecture kind {kind!r}")


def save_model(path, model: Module, seed: int = 0) -> None:
    save_checkpoint(path, model, model.architecture(), seed)


def load_model(path):
    """Rebuild a model from a checkpoint; returns (model, header)."""
    header, arrays = load_checkpoint(path)
    model = build_model(header["architecture"])
    restore_state(model, arrays)
    return model, header

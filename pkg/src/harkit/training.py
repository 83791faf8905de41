"""Training orchestration for the six regimes.

Every run is fully determined by (config, seed): all randomness flows from
the config seed through tagged derivations (init, dropout, batches, pairs,
split, labels), so repeating a run reproduces parameters and logs bit for
bit.  The two-stage regime hands its stage-1 parameters to stage 2 through
an actual checkpoint round trip, which both exercises the container format
and guarantees exact initialization.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import losses
from .data.core import LabeledSubset, Split, WindowSet, stratified_split, subsample_labels
from .evaluate import EvalReport, evaluate_embeddings, person_accuracy
from .features import FeatureSet, extract_feature_set, fit_standardization, standardize
from .losses import LossWeights
from .models import (
    ResidualAutoencoder,
    SiameseResidualAutoencoder,
    SiameseTcn,
    SupervisedTcn,
    load_model,
    save_model,
)
from .neighbors import NeighborIndex, feature_knn, temporal_neighbors
from .nn import Adam, SGD, Tensor
from .pairs import PairBatch, sample_pairs, sample_quadruples

REGIMES = (
    "supervised",
    "autoencoder",
    "weak_single",
    "weak_multi",
    "self_supervised",
    "weakly_self_supervised",
)
_AE_REGIMES = {"autoencoder", "self_supervised", "weakly_self_supervised"}
_PAIR_REGIMES = {"weak_single", "weak_multi", "weakly_self_supervised"}


class ConfigError(ValueError):
    pass


class TrainingDiverged(RuntimeError):
    pass


def derive_seed(base: int, tag: str) -> int:
    """Stable per-purpose seed derivation from one base seed."""
    digest = hashlib.sha256(f"{base}:{tag}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


@dataclass
class TrainConfig:
    regime: str = "autoencoder"
    epochs: Optional[int] = None      # default: 100 (AE family), 50 (TCN family)
    batch_size: int = 128
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    seed: int = 0
    label_fraction: float = 1.0

    # Loss weights; None picks the regime defaults.
    alpha: Optional[float] = None
    beta: Optional[float] = None
    gamma: Optional[float] = None
    margin: float = 1.0
    stage1_alpha: float = 0.3         # two-stage regime, pretraining weights
    stage1_beta: float = 0.5
    stage1_fraction: float = 0.7      # share of epochs spent in stage 1
    stage2_lr_scale: float = 1.0      # fine-tuning learning-rate multiplier

    # Data preparation.
    split_fractions: tuple = (0.6, 0.2, 0.2)
    split_by_subject: bool = False
    temporal_radius: int = 2
    knn_k: int = 5

    # Pair sampling.
    pairs_per_labeled: int = 4
    pos_ratio: float = 0.5

    # Architecture scale (paper defaults; tests shrink them for speed).
    tcn_filters: int = 128
    tcn_blocks: int = 3
    tcn_convs_per_block: int = 3
    tcn_dropout: float = 0.1
    embed_dim: int = 96
    ae_hidden: tuple = (256, 256, 128, 96)

    def __post_init__(self):
        if self.epochs is None:
            self.epochs = 100 if self.regime in _AE_REGIMES else 50
        if self.alpha is None or self.beta is None or self.gamma is None:
            a, b, g = _REGIME_WEIGHTS.get(self.regime, (0.0, 0.0, 0.0))
            self.alpha = a if self.alpha is None else self.alpha
            self.beta = b if self.beta is None else self.beta
            self.gamma = g if self.gamma is None else self.gamma
        self.split_fractions = tuple(self.split_fractions)
        self.ae_hidden = tuple(self.ae_hidden)

    def weights(self) -> LossWeights:
        return LossWeights(alpha=self.alpha, beta=self.beta, gamma=self.gamma,
                           margin=self.margin)

    def stage1_weights(self) -> LossWeights:
        return LossWeights(alpha=self.stage1_alpha, beta=self.stage1_beta,
                           margin=self.margin)

    def validate(self) -> None:
        """Collect every config problem before raising."""
        problems = []
        if self.regime not in REGIMES:
            problems.append(f"regime: unknown {self.regime!r}, expected one of {REGIMES}")
        if self.epochs < 1:
            problems.append(f"epochs: must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            problems.append(f"batch_size: must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            problems.append(f"learning_rate: must be > 0, got {self.learning_rate}")
        if self.optimizer not in ("adam", "sgd"):
            problems.append(f"optimizer: unknown {self.optimizer!r}")
        if not 0.0 < self.label_fraction <= 1.0:
            problems.append(f"label_fraction: must be in (0, 1], got {self.label_fraction}")
        if abs(sum(self.split_fractions) - 1.0) > 1e-9:
            problems.append(f"split_fractions: must sum to 1, got {self.split_fractions}")
        if not 0.0 < self.stage1_fraction < 1.0:
            problems.append(f"stage1_fraction: must be in (0, 1), got {self.stage1_fraction}")
        for key in ("alpha", "beta", "gamma"):
            v = getattr(self, key)
            if not 0.0 <= v <= 1.0:
                problems.append(f"{key}: must be in [0, 1], got {v}")
        if self.margin <= 0:
            problems.append(f"margin: must be > 0, got {self.margin}")
        if self.temporal_radius < 0:
            problems.append(f"temporal_radius: must be >= 0, got {self.temporal_radius}")
        if self.knn_k < 1:
            problems.append(f"knn_k: must be >= 1, got {self.knn_k}")
        if problems:
            raise ConfigError("; ".join(problems))

    def config_hash(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True, default=list)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


_REGIME_WEIGHTS = {
    "supervised": (0.0, 0.0, 0.0),
    "autoencoder": (0.0, 0.0, 0.0),
    "weak_single": (0.0, 0.0, 0.0),
    "weak_multi": (0.6, 0.4, 0.0),
    "self_supervised": (0.3, 0.5, 0.0),
    "weakly_self_supervised": (0.05, 0.1, 0.8),
}


@dataclass
class PreparedData:
    split: Split
    n_classes: int
    n_subjects: int
    train_features: Optional[FeatureSet] = None
    val_features: Optional[FeatureSet] = None
    test_features: Optional[FeatureSet] = None
    tc_stats: Optional[tuple] = None      # (mu, offset) on the train set
    fc_stats: Optional[tuple] = None
    tc_index: Optional[NeighborIndex] = None
    fc_index: Optional[NeighborIndex] = None
    labeled: Optional[LabeledSubset] = None


def prepare_data(ws: WindowSet, config: TrainConfig) -> PreparedData:
    """Split, standardize features, build neighborhoods and the label budget."""
    config.validate()
    split = stratified_split(ws, config.split_fractions,
                             seed=derive_seed(config.seed, "split"),
                             by_subject=config.split_by_subject)
    n_classes = int(np.unique(ws.activities).size)
    n_subjects = int(np.unique(ws.persons).size)
    prepared = PreparedData(split=split, n_classes=n_classes, n_subjects=n_subjects)

    if config.regime in _AE_REGIMES:
        train_fs = fit_standardization(extract_feature_set(split.train))
        prepared.train_features = standardize(train_fs, train_fs)
        prepared.val_features = standardize(extract_feature_set(split.val), train_fs)
        prepared.test_features = standardize(extract_feature_set(split.test), train_fs)

    if config.regime in ("self_supervised", "weakly_self_supervised"):
        prepared.tc_index = temporal_neighbors(split.train, config.temporal_radius)
        prepared.fc_index = feature_knn(prepared.train_features, config.knn_k)
        values = prepared.train_features.matrix
        prepared.tc_stats = losses.neighborhood_stats(prepared.tc_index.lists, values)
        prepared.fc_stats = losses.neighborhood_stats(prepared.fc_index.lists, values)

    if config.regime in _PAIR_REGIMES:
        prepared.labeled = subsample_labels(split.train, config.label_fraction,
                                            seed=derive_seed(config.seed, "labels"))
    return prepared


@dataclass
class TrainResult:
    model: object
    history: list
    manifest: dict
    stage1_checkpoint: Optional[bytes] = None


def _check_finite(value: float, epoch: int, regime: str) -> float:
    if not np.isfinite(value):
        raise TrainingDiverged(
            f"{regime}: non-finite loss {value} at epoch {epoch}; "
            f"lower the learning rate or inspect the input scaling")
    return float(value)


def _make_optimizer(config: TrainConfig, params):
    if config.optimizer == "adam":
        return Adam(params, learning_rate=config.learning_rate)
    return SGD(params, learning_rate=config.learning_rate)


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def _gather_stats(stats, rows):
    mu, off = stats
    return mu[rows], off[rows]


def train(config: TrainConfig, ws: WindowSet) -> TrainResult:
    """Run one regime end to end; returns the model, loss trace and manifest."""
    config.validate()
    prepared = prepare_data(ws, config)
    trainer = {
        "supervised": _train_supervised,
        "autoencoder": _train_autoencoder,
        "self_supervised": _train_self_supervised,
        "weak_single": _train_weak_siamese,
        "weak_multi": _train_weak_siamese,
        "weakly_self_supervised": _train_weakly_self_supervised,
    }[config.regime]
    model, history, extra = trainer(config, prepared)
    extra = dict(extra or {})
    stage1_ckpt = extra.pop("_stage1_ckpt", None)
    manifest = {
        "command": "train",
        "regime": config.regime,
        "config": asdict(config),
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "n_train": len(prepared.split.train),
        "n_val": len(prepared.split.val),
        "n_test": len(prepared.split.test),
        "n_classes": prepared.n_classes,
        "n_subjects": prepared.n_subjects,
        "epochs_run": len(history),
        "final_loss": history[-1]["loss"] if history else None,
    }
    if prepared.labeled is not None:
        manifest["n_labeled"] = int(len(prepared.labeled))
        manifest["bumped_classes"] = prepared.labeled.bumped_classes
    manifest.update(extra)
    return TrainResult(model=model, history=history, manifest=manifest,
                       stage1_checkpoint=stage1_ckpt)


# -- per-regime loops ---------------------------------------------------------


def _train_supervised(config: TrainConfig, prepared: PreparedData):
    train_ws = prepared.split.train
    model = SupervisedTcn(
        train_ws.n_channels, prepared.n_classes,
        seed=derive_seed(config.seed, "init"),
        filters=config.tcn_filters, n_blocks=config.tcn_blocks,
        convs_per_block=config.tcn_convs_per_block,
        dropout=config.tcn_dropout, embed_dim=config.embed_dim)
    model.seed_rng(derive_seed(config.seed, "dropout"))
    opt = _make_optimizer(config, model.parameters())
    rng = np.random.default_rng(derive_seed(config.seed, "batches"))
    x = train_ws.values.astype(np.float32)
    y = train_ws.activities
    xv = prepared.split.val.values.astype(np.float32)
    yv = prepared.split.val.activities

    history = []
    for epoch in range(config.epochs):
        total, count = 0.0, 0
        for rows in _batches(len(train_ws), config.batch_size, rng):
            model.zero_grad()
            loss = losses.cross_entropy(model.forward(Tensor(x[rows]), True), y[rows])
            loss.backward()
            opt.step()
            total += loss.item() * rows.size
            count += rows.size
        val = losses.cross_entropy(model.forward(Tensor(xv), False), yv).item()
        history.append({
            "epoch": epoch,
            "loss": _check_finite(total / count, epoch, config.regime),
            "val_loss": _check_finite(val, epoch, config.regime),
        })
    return model, history, {}


def _make_autoencoder(config: TrainConfig, input_dim: int) -> ResidualAutoencoder:
    return ResidualAutoencoder(input_dim, config.ae_hidden,
                               seed=derive_seed(config.seed, "init"))


def _train_autoencoder(config: TrainConfig, prepared: PreparedData):
    x = prepared.train_features.matrix.astype(np.float32)
    xv = prepared.val_features.matrix.astype(np.float32)
    model = _make_autoencoder(config, x.shape[1])
    opt = _make_optimizer(config, model.parameters())
    rng = np.random.default_rng(derive_seed(config.seed, "batches"))

    history = []
    for epoch in range(config.epochs):
        total, count = 0.0, 0
        for rows in _batches(x.shape[0], config.batch_size, rng):
            model.zero_grad()
            recon, _ = model.reconstruct(Tensor(x[rows]), True)
            loss = losses.reconstruction_loss(x[rows], recon)
            loss.backward()
            opt.step()
            total += loss.item() * rows.size
            count += rows.size
        vrecon, _ = model.reconstruct(Tensor(xv), False)
        history.append({
            "epoch": epoch,
            "loss": _check_finite(total / count, epoch, config.regime),
            "val_loss": _check_finite(
                losses.reconstruction_loss(xv, vrecon).item(), epoch, config.regime),
        })
    return model, history, {}


def _self_supervised_epochs(config: TrainConfig, prepared: PreparedData,
                            model: ResidualAutoencoder, opt, rng,
                            epochs: int, weights: LossWeights, history: list,
                            stage: str):
    x = prepared.train_features.matrix.astype(np.float32)
    xv = prepared.val_features.matrix.astype(np.float32)
    for epoch in range(epochs):
        total, count = 0.0, 0
        comp_sums = {"recon": 0.0, "temporal": 0.0, "feature": 0.0}
        for rows in _batches(x.shape[0], config.batch_size, rng):
            model.zero_grad()
            recon, _ = model.reconstruct(Tensor(x[rows]), True)
            loss = losses.self_supervised_loss(
                x[rows], recon,
                _gather_stats(prepared.tc_stats, rows),
                _gather_stats(prepared.fc_stats, rows),
                weights.alpha, weights.beta)
            loss.backward()
            opt.step()
            comps = losses.self_supervised_components(
                x[rows], recon, _gather_stats(prepared.tc_stats, rows),
                _gather_stats(prepared.fc_stats, rows))
            for k, v in comps.items():
                comp_sums[k] += v * rows.size
            total += loss.item() * rows.size
            count += rows.size
        vrecon, _ = model.reconstruct(Tensor(xv), False)
        entry = {
            "epoch": len(history),
            "stage": stage,
            "loss": _check_finite(total / count, epoch, config.regime),
            "val_loss": _check_finite(
                losses.reconstruction_loss(xv, vrecon).item(), epoch, config.regime),
        }
        entry.update({k: v / count for k, v in comp_sums.items()})
        history.append(entry)


def _train_self_supervised(config: TrainConfig, prepared: PreparedData):
    model = _make_autoencoder(config, prepared.train_features.dim)
    opt = _make_optimizer(config, model.parameters())
    rng = np.random.default_rng(derive_seed(config.seed, "batches"))
    history = []
    _self_supervised_epochs(config, prepared, model, opt, rng, config.epochs,
                            config.weights(), history, stage="self_supervised")
    return model, history, {}


def _train_weak_siamese(config: TrainConfig, prepared: PreparedData):
    multi = config.regime == "weak_multi"
    train_ws = prepared.split.train
    labeled = prepared.labeled
    if len(labeled) < 2:
        raise ConfigError(
            "weakly supervised training needs at least 2 labeled windows; "
            "prepare a larger label budget (label_fraction)")
    model = SiameseTcn(
        train_ws.n_channels, multi_task=multi,
        seed=derive_seed(config.seed, "init"),
        filters=config.tcn_filters, n_blocks=config.tcn_blocks,
        convs_per_block=config.tcn_convs_per_block,
        dropout=config.tcn_dropout, embed_dim=config.embed_dim)
    model.seed_rng(derive_seed(config.seed, "dropout"))
    opt = _make_optimizer(config, model.parameters())
    rng = np.random.default_rng(derive_seed(config.seed, "batches"))
    x = train_ws.values.astype(np.float32)
    n_pairs = config.pairs_per_labeled * len(labeled)
    pair_seed = derive_seed(config.seed, "pairs")
    weights = config.weights()

    history = []
    for epoch in range(config.epochs):
        if multi:
            batch = sample_quadruples(labeled.indices, train_ws.activities,
                                      train_ws.persons, n_pairs,
                                      seed=pair_seed + epoch)
        else:
            batch = sample_pairs(labeled.indices, train_ws.activities, n_pairs,
                                 pos_ratio=config.pos_ratio, seed=pair_seed + epoch)
        total, count = 0.0, 0
        for rows in _batches(len(batch), config.batch_size, rng):
            model.zero_grad()
            xa = Tensor(x[batch.a[rows]])
            xb = Tensor(x[batch.b[rows]])
            if multi:
                (ea_act, eb_act), (ea_pers, eb_pers) = model.forward_pair(xa, xb, True)
                loss = losses.multitask_contrastive(
                    ea_act, eb_act, ea_pers, eb_pers,
                    batch.y_act[rows], batch.y_pers[rows],
                    weights.alpha, weights.beta, weights.margin)
            else:
                ea, eb = model.forward_pair(xa, xb, True)
                loss = losses.contrastive_loss(ea, eb, batch.y_act[rows],
                                               weights.margin)
            loss.backward()
            opt.step()
            total += loss.item()
            count += rows.size
        history.append({
            "epoch": epoch,
            # Sum-over-batch loss reported per pair for comparable traces.
            "loss": _check_finite(total / count, epoch, config.regime),
        })
    return model, history, {}


def _train_weakly_self_supervised(config: TrainConfig, prepared: PreparedData):
    labeled = prepared.labeled
    if len(labeled) < 2:
        raise ConfigError(
            "the weakly self-supervised stage needs at least 2 labeled windows; "
            "prepare a larger label budget (label_fraction)")
    stage1_epochs = max(1, int(round(config.stage1_fraction * config.epochs)))
    stage2_epochs = max(1, config.epochs - stage1_epochs)

    # Stage 1: self-supervised pretraining of the autoencoder.
    ae = _make_autoencoder(config, prepared.train_features.dim)
    opt = _make_optimizer(config, ae.parameters())
    rng = np.random.default_rng(derive_seed(config.seed, "batches"))
    history = []
    _self_supervised_epochs(config, prepared, ae, opt, rng, stage1_epochs,
                            config.stage1_weights(), history, stage="pretrain")

    # Stage hand-off through the checkpoint container (exact by round trip).
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "stage1.ckpt")
        save_model(path, ae, seed=config.seed)
        with open(path, "rb") as f:
            stage1_bytes = f.read()
        ae_reloaded, _ = load_model(path)
    model = SiameseResidualAutoencoder(ae_reloaded)
    # Fine-tuning batches repeat a label budget far too small to
    # re-estimate population statistics, so stage 2 runs with frozen
    # normalization: forward passes use the pretrained running stats
    # (train=False), which is also exactly the geometry evaluation sees.
    model.freeze_batchnorm_running_stats()

    # Stage 2: pairwise fine-tuning with the full joint objective, at a
    # reduced learning rate so a small constraint set refines rather than
    # overwrites the pretrained structure.
    x = prepared.train_features.matrix.astype(np.float32)
    weights = config.weights()
    if config.optimizer == "adam":
        opt2 = Adam(model.parameters(),
                    learning_rate=config.learning_rate * config.stage2_lr_scale)
    else:
        opt2 = SGD(model.parameters(),
                   learning_rate=config.learning_rate * config.stage2_lr_scale)
    n_pairs = config.pairs_per_labeled * len(labeled)
    pair_seed = derive_seed(config.seed, "pairs")
    train_ws = prepared.split.train
    for epoch in range(stage2_epochs):
        batch = sample_pairs(labeled.indices, train_ws.activities, n_pairs,
                             pos_ratio=config.pos_ratio, seed=pair_seed + epoch)
        total, count = 0.0, 0
        for rows in _batches(len(batch), config.batch_size, rng):
            a_rows = batch.a[rows]
            b_rows = batch.b[rows]
            model.zero_grad()
            za, zb, ra, rb = model.forward_pair(Tensor(x[a_rows]), Tensor(x[b_rows]), False)
            loss = losses.weakly_self_supervised_loss(
                x[a_rows], x[b_rows], ra, rb,
                _gather_stats(prepared.tc_stats, a_rows),
                _gather_stats(prepared.fc_stats, a_rows),
                _gather_stats(prepared.tc_stats, b_rows),
                _gather_stats(prepared.fc_stats, b_rows),
                za, zb, batch.y_act[rows], weights)
            loss.backward()
            opt2.step()
            total += loss.item()
            count += rows.size
        history.append({
            "epoch": len(history),
            "stage": "finetune",
            "loss": _check_finite(total / count, epoch, config.regime),
        })
    return model, history, {"_stage1_ckpt": stage1_bytes,
                            "stage1_epochs": stage1_epochs,
                            "stage2_epochs": stage2_epochs}


# -- embedding extraction and evaluation --------------------------------------


def extract_embeddings(model, config: TrainConfig, prepared: PreparedData,
                       part: str = "test", space: str = "activity") -> np.ndarray:
    """Frozen-model embeddings of one split, in batches."""
    if config.regime in _AE_REGIMES:
        fs = {"train": prepared.train_features, "val": prepared.val_features,
              "test": prepared.test_features}[part]
        x = fs.matrix.astype(np.float32)
    else:
        ws = getattr(prepared.split, part)
        x = ws.values.astype(np.float32)
    chunks = []
    for start in range(0, x.shape[0], 256):
        xb = Tensor(x[start:start + 256])
        if space == "person":
            emb = model.encode_person(xb, False)
        else:
            emb = model.encode(xb, False)
        chunks.append(emb.data)
    return np.concatenate(chunks, axis=0)


def evaluate_run(model, config: TrainConfig, prepared: PreparedData,
                 part: str = "test", restarts: int = 10) -> EvalReport:
    """Cluster the embeddings of one split and score against labels."""
    ws = getattr(prepared.split, part)
    emb = extract_embeddings(model, config, prepared, part)
    report = evaluate_embeddings(
        emb, ws.activities, k=prepared.n_classes, restarts=restarts,
        seed=derive_seed(config.seed, "eval"), config_hash=config.config_hash())
    if config.regime == "weak_multi":
        pers_emb = extract_embeddings(model, config, prepared, part, space="person")
        report.person_accuracy = person_accuracy(
            pers_emb, ws.persons, restarts=restarts,
            seed=derive_seed(config.seed, "eval-person"))
    return report


def run_experiment_suite(configs, ws: WindowSet, restarts: int = 10) -> list:
    """Train and evaluate one row per config; failures land in the row."""
    rows = []
    for config in configs:
        row = {
            "regime": config.regime,
            "label_fraction": config.label_fraction,
            "alpha": config.alpha,
            "beta": config.beta,
            "gamma": config.gamma,
            "seed": config.seed,
        }
        try:
            result = train(config, ws)
            prepared = prepare_data(ws, config)
            report = evaluate_run(result.model, config, prepared, restarts=restarts)
            row.update({
                "accuracy": report.accuracy,
                "macro_f1": report.macro_f1,
                "person_accuracy": report.person_accuracy,
                "final_loss": result.manifest["final_loss"],
                "error": None,
            })
        except Exception as e:  # keep the suite alive; record the failure
            row.update({"accuracy": None, "macro_f1": None,
                        "person_accuracy": None, "final_loss": None,
                        "error": f"{type(e).__name__}: {e}"})
        rows.append(row)
    return rows


def suite_rows_to_csv(rows, path) -> None:
    cols = ["regime", "label_fraction", "alpha", "beta", "gamma", "seed",
            "accuracy", "macro_f1", "person_accuracy", "final_loss", "error"]
    with open(path, "w", encoding="utf-8") as f:
        f.write(",".join(cols) + "\n")
        for row in rows:
            out = []
            for c in cols:
                v = row.get(c)
                if v is None:
                    out.append("")
                elif isinstance(v, float):
                    out.append(format(v, ".6g"))
                else:
                    out.append(str(v).replace(",", ";"))
            f.write(",".join(out) + "\n")

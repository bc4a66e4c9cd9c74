"""Training loop: weighted loss, Adam updates, plateau-triggered LR decay.

All randomness (head init, epoch shuffles, dropout masks) is drawn from a
single generator seeded by the config, in that documented order, so a rerun
with identical inputs reproduces the identical history.
"""

from __future__ import annotations

import copy
import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .dataset import LABELS, DatasetManifest, load_sample, load_tensor, save_tensor
from .errors import InvalidArgumentError, TrainingDivergedError
from .imbalance import PROB_FLOOR, ClassWeights
from .models import (
    ClassifierHead,
    FaceClassifier,
    HeadConfig,
    TinyConvBackbone,
    build_head,
    softmax,
)

IMPROVE_EPS = 1e-8


@dataclass
class TrainConfig:
    max_epochs: int
    lr0: float = 1e-3
    batch_size: int = 16
    plateau_patience: int = 3
    plateau_factor: float = 0.5
    min_lr: float = 1e-6
    seed: int = 0
    monitor: str = "val_loss"
    freeze_backbone: bool = True


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float
    lr: float


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)

    def best_val_loss(self) -> float:
        return min(r.val_loss for r in self.records)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray

    @classmethod
    def zeros_like(cls, param: np.ndarray) -> "AdamState":
        return cls(m=np.zeros_like(param), v=np.zeros_like(param))


def adam_step(
    param: np.ndarray,
    grad: np.ndarray,
    state: AdamState,
    lr: float,
    t: int,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
):
    """One bias-corrected Adam update; returns (new_param, new_state)."""
    if t < 1:
        raise InvalidArgumentError(f"step counter must be >= 1, got {t}")
    m = beta1 * state.m + (1.0 - beta1) * grad
    v = beta2 * state.v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    new_param = param - lr * m_hat / (np.sqrt(v_hat) + eps)
    return new_param, AdamState(m=m, v=v)


def plateau_schedule(
    history: TrainHistory | list[EpochRecord],
    patience: int,
    factor: float,
    min_lr: float,
) -> float:
    """Learning rate in effect after the recorded epochs.

    Replays the rule from the first record's rate: every time the monitored
    validation loss fails to improve on the running best by more than 1e-8
    for ``patience`` consecutive epochs, the rate drops to
    max(lr * factor, min_lr) (never rising) and the counter resets.
    """
    records = history.records if isinstance(history, TrainHistory) else list(history)
    if not records:
        raise InvalidArgumentError("history is empty")
    lr = records[0].lr
    best = np.inf
    since = 0
    for rec in records:
        if rec.val_loss < best - IMPROVE_EPS:
            best = rec.val_loss
            since = 0
            continue
        since += 1
        if since >= patience:
            reduced = max(lr * factor, min_lr)
            if reduced < lr:
                lr = reduced
            since = 0
    return lr


def weighted_xent_with_grad(logits: np.ndarray, y: np.ndarray, weight_vec: np.ndarray):
    """Batch-mean weighted cross entropy and its gradient at the logits.

    The gradient is w_label * (softmax - onehot) / batch, the closed form
    for the clipped-log loss away from the clip floor.
    """
    probs = softmax(logits)
    n = len(y)
    w = weight_vec[y]
    picked = np.clip(probs[np.arange(n), y], PROB_FLOOR, 1.0)
    loss = float(np.mean(-w * np.log(picked)))
    dlogits = probs.copy()
    dlogits[np.arange(n), y] -= 1.0
    dlogits *= (w / n)[:, None]
    return loss, dlogits


def training_loss_and_grads(
    model: FaceClassifier,
    x: np.ndarray,
    y: np.ndarray,
    weight_vec: np.ndarray,
    dropout_mask: np.ndarray | None = None,
    include_backbone: bool = True,
):
    """Full-model training loss with gradients for every trainable tensor.

    Gradients come back keyed "head.<name>" and "backbone.<name>". Passing
    an explicit dropout mask keeps the computation deterministic, which is
    what the finite-difference checks rely on.
    """
    features, bcache = model.backbone.forward(x)
    logits, hcache = model.head.forward(features, dropout_mask)
    loss, dlogits = weighted_xent_with_grad(logits, y, weight_vec)
    hgrads, d_pooled = model.head.backward(hcache, dlogits)
    grads = {f"head.{k}": v for k, v in hgrads.items()}
    if include_backbone:
        h, w = features.shape[1:3]
        dfeatures = np.broadcast_to((d_pooled / (h * w))[:, None, None, :], features.shape)
        _, bgrads = model.backbone.backward(bcache, dfeatures, want_params=True)
        grads.update({f"backbone.{k}": v for k, v in bgrads.items()})
    return loss, grads


def _pooled_features(backbone: TinyConvBackbone, x: np.ndarray, chunk: int = 32) -> np.ndarray:
    out = []
    for i in range(0, len(x), chunk):
        out.append(backbone.features(x[i : i + chunk]).mean(axis=(1, 2)))
    return np.concatenate(out) if out else np.zeros((0, backbone.feature_dim))


def _load_split(manifest: DatasetManifest, split: str, loader) -> tuple[np.ndarray, np.ndarray]:
    records = manifest.split_records(split)
    if not records:
        raise InvalidArgumentError(f"manifest has no records in split {split!r}")
    x = np.stack([np.asarray(loader(r.tensor_path), dtype=np.float64) for r in records])
    y = np.array([LABELS.index(r.label) for r in records], dtype=np.intp)
    return x, y


def train(
    manifest: DatasetManifest,
    backbone: TinyConvBackbone,
    head_config: HeadConfig,
    config: TrainConfig,
    weights: ClassWeights,
    loader: Callable[[str], np.ndarray] = load_sample,
):
    """Fit a classifier head (and optionally the backbone) on the manifest.

    Iterates seeded-shuffled train batches, tracks weighted loss on the
    validation split, decays the learning rate on plateaus, and returns the
    model restored to its best-validation parameters together with the
    per-epoch history. Raises TrainingDivergedError naming the epoch and
    batch if the loss goes non-finite.
    """
    x_train, y_train = _load_split(manifest, "train", loader)
    x_val, y_val = _load_split(manifest, "val", loader)
    n = len(x_train)

    rng = np.random.default_rng(config.seed)
    head = build_head(backbone.feature_dim, head_config)
    head.init_random(rng)
    model = FaceClassifier(backbone, head)
    w_vec = weights.as_vector(LABELS)

    frozen = config.freeze_backbone
    if frozen:
        pooled_train = _pooled_features(backbone, x_train)
        pooled_val = _pooled_features(backbone, x_val)

    trainable = {f"head.{k}": head.params for k in head.params}
    if not frozen:
        trainable.update({f"backbone.{k}": backbone.params for k in backbone.params})
    states = {
        name: AdamState.zeros_like(owner[name.split(".", 1)[1]])
        for name, owner in trainable.items()
    }

    def _val_metrics() -> tuple[float, float]:
        if frozen:
            logits, _ = head.forward_pooled(pooled_val)
        else:
            _, logits = model.forward(x_val)
        loss, _ = weighted_xent_with_grad(logits, y_val, w_vec)
        probs = softmax(logits)
        pred = (probs[:, 1] >= probs[:, 0]).astype(np.intp)
        return loss, float(np.mean(pred == y_val))

    history = TrainHistory()
    lr = config.lr0
    step = 0
    best_loss = np.inf
    best_params: dict[str, np.ndarray] = {}
    rate = head_config.dropout_rate
    for epoch in range(1, config.max_epochs + 1):
        perm = rng.permutation(n)
        epoch_loss = 0.0
        for b0 in range(0, n, config.batch_size):
            batch = perm[b0 : b0 + config.batch_size]
            mask = None
            if rate > 0:
                mask = (
                    rng.random((len(batch), head_config.dense_units)) < (1.0 - rate)
                ).astype(np.float64)
            if frozen:
                logits, hcache = head.forward_pooled(pooled_train[batch], mask)
                loss, dlogits = weighted_xent_with_grad(logits, y_train[batch], w_vec)
                grads, _ = head.backward(hcache, dlogits)
                grads = {f"head.{k}": v for k, v in grads.items()}
            else:
                loss, grads = training_loss_and_grads(
                    model, x_train[batch], y_train[batch], w_vec, mask
                )
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch {b0 // config.batch_size}"
                )
            step += 1
            for name, grad in grads.items():
                owner = trainable[name]
                key = name.split(".", 1)[1]
                owner[key], states[name] = adam_step(owner[key], grad, states[name], lr, step)
            epoch_loss += loss * len(batch)
        val_loss, val_acc = _val_metrics()
        history.records.append(
            EpochRecord(epoch, epoch_loss / n, val_loss, val_acc, lr)
        )
        if val_loss < best_loss:
            best_loss = val_loss
            best_params = {
                name: owner[name.split(".", 1)[1]].copy() for name, owner in trainable.items()
            }
        lr = plateau_schedule(
            history, config.plateau_patience, config.plateau_factor, config.min_lr
        )
    for name, value in best_params.items():
        trainable[name][name.split(".", 1)[1]] = value.copy()
    return model, history


def write_history_csv(history: TrainHistory, path: str | Path) -> None:
    """Write per-epoch records as CSV (epoch, train_loss, val_loss, val_acc, lr)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss", "val_acc", "lr"])
        for r in history.records:
            writer.writerow([r.epoch, r.train_loss, r.val_loss, r.val_accuracy, r.lr])


def save_checkpoint(model: FaceClassifier, ckpt_dir: str | Path) -> None:
    """Write model parameters as tensor files plus a JSON parameter index."""
    root = Path(ckpt_dir)
    root.mkdir(parents=True, exist_ok=True)
    arrays = {}
    named = {f"backbone.{k}": v for k, v in model.backbone.params.items()}
    named.update({f"head.{k}": v for k, v in model.head.params.items()})
    for name, value in named.items():
        fname = name.replace(".", "_") + ".tsr"
        save_tensor(value.reshape(-1, 1, 1), root / fname)
        arrays[name] = {"file": fname, "shape": list(value.shape)}
    index = {
        "labels": list(LABELS),
        "backbone": {
            "kind": model.backbone.kind,
            "seed": model.backbone.seed,
            "in_channels": model.backbone.in_channels,
            "stage_channels": list(model.backbone.stage_channels),
        },
        "head": {
            "feature_dim": model.head.feature_dim,
            "dense_units": model.head.config.dense_units,
            "dropout_rate": model.head.config.dropout_rate,
            "classes": model.head.config.classes,
        },
        "arrays": arrays,
    }
    with open(root / "params.json", "w", encoding="utf-8") as fh:
        json.dump(index, fh, indent=2)


def load_checkpoint(ckpt_dir: str | Path) -> FaceClassifier:
    """Rebuild a model from :func:`save_checkpoint` output."""
    root = Path(ckpt_dir)
    with open(root / "params.json", "r", encoding="utf-8") as fh:
        index = json.load(fh)
    b = index["backbone"]
    backbone = TinyConvBackbone(
        seed=b["seed"], in_channels=b["in_channels"], stage_channels=tuple(b["stage_channels"])
    )
    h = index["head"]
    head = ClassifierHead(
        h["feature_dim"],
        HeadConfig(h["dense_units"], h["dropout_rate"], h["classes"]),
    )
    model = FaceClassifier(backbone, head)
    for name, meta in index["arrays"].items():
        scope, key = name.split(".", 1)
        owner = backbone.params if scope == "backbone" else head.params
        value = load_tensor(root / meta["file"]).astype(np.float64).reshape(meta["shape"])
        owner[key] = value
    return model

"""Confusion matrices, accuracy, and support-weighted precision/recall/F1."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from PIL import Image, ImageDraw

from .dataset import LABELS, DatasetManifest, load_sample
from .errors import InvalidArgumentError


@dataclass
class ConfusionMatrix:
    """2x2 counts indexed [true][pred] in the order (real, fake)."""

    counts: np.ndarray
    labels: tuple[str, ...] = LABELS

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class EvalReport:
    confusion: ConfusionMatrix
    accuracy: float
    per_class: dict[str, tuple[float, float, float]]  # label -> (P, R, F1)
    weighted: tuple[float, float, float]

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "confusion": {
                "labels": list(self.confusion.labels),
                "counts": self.confusion.counts.tolist(),
            },
            "per_class": {
                lab: {"precision": p, "recall": r, "f1": f}
                for lab, (p, r, f) in self.per_class.items()
            },
            "weighted": {
                "precision": self.weighted[0],
                "recall": self.weighted[1],
                "f1": self.weighted[2],
            },
        }


def predict_index(probs: np.ndarray) -> int:
    """Class index from a probability pair; an exact tie predicts fake."""
    return 1 if probs[1] >= probs[0] else 0


def confusion(
    y_true: Sequence[str], y_pred: Sequence[str], labels: tuple[str, ...] = LABELS
) -> ConfusionMatrix:
    """Tally counts[t][p] = #(true == t and pred == p)."""
    if len(y_true) != len(y_pred):
        raise InvalidArgumentError(f"length mismatch: {len(y_true)} vs {len(y_pred)}")
    if len(y_true) < 1:
        raise InvalidArgumentError("need at least one sample")
    index = {lab: i for i, lab in enumerate(labels)}
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        if t not in index or p not in index:
            raise InvalidArgumentError(f"label outside {labels}: {t!r}/{p!r}")
        counts[index[t], index[p]] += 1
    return ConfusionMatrix(counts=counts, labels=labels)


def _safe_div(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def report(cm: ConfusionMatrix) -> EvalReport:
    """Accuracy plus per-class and support-weighted precision/recall/F1.

    Undefined ratios (zero denominators) evaluate to 0.
    """
    counts = cm.counts
    total = cm.total
    if total < 1:
        raise InvalidArgumentError("confusion matrix is empty")
    per_class = {}
    supports = counts.sum(axis=1)
    weighted = np.zeros(3)
    for i, label in enumerate(cm.labels):
        tp = float(counts[i, i])
        precision = _safe_div(tp, float(counts[:, i].sum()))
        recall = _safe_div(tp, float(counts[i, :].sum()))
        f1 = _safe_div(2 * precision * recall, precision + recall)
        per_class[label] = (precision, recall, f1)
        weighted += supports[i] * np.array([precision, recall, f1])
    weighted /= supports.sum()
    return EvalReport(
        confusion=cm,
        accuracy=float(np.trace(counts)) / total,
        per_class=per_class,
        weighted=tuple(float(v) for v in weighted),
    )


def evaluate(
    model,
    manifest: DatasetManifest,
    split: str = "test",
    loader: Callable[[str], np.ndarray] = load_sample,
    batch_size: int = 32,
    image_path: str | Path | None = None,
) -> EvalReport:
    """Predict a manifest split and compile the evaluation report.

    The prediction is the argmax of the model's class probabilities with
    exact ties going to fake. When ``image_path`` is given the confusion
    matrix is also rendered to that file.
    """
    records = manifest.split_records(split)
    if not records:
        raise InvalidArgumentError(f"manifest has no records in split {split!r}")
    y_true = [r.label for r in records]
    y_pred = []
    for i in range(0, len(records), batch_size):
        chunk = records[i : i + batch_size]
        x = np.stack([np.asarray(loader(r.tensor_path), dtype=np.float64) for r in chunk])
        probs = np.atleast_2d(model.predict_proba(x))
        y_pred.extend(LABELS[predict_index(p)] for p in probs)
    result = report(confusion(y_true, y_pred))
    if image_path is not None:
        render_confusion(result.confusion, image_path)
    return result


def render_confusion(cm: ConfusionMatrix, path: str | Path, cell: int = 96) -> str:
    """Draw the matrix as a shaded grid with counts and axis labels."""
    k = len(cm.labels)
    margin = 48
    size = (margin + k * cell + 8, margin + k * cell + 8)
    img = Image.new("RGB", size, "white")
    draw = ImageDraw.Draw(img)
    peak = max(1, int(cm.counts.max()))
    for i in range(k):
        for j in range(k):
            x0 = margin + j * cell
            y0 = margin + i * cell
            shade = int(255 - 180 * (cm.counts[i, j] / peak))
            draw.rectangle([x0, y0, x0 + cell, y0 + cell], fill=(shade, shade, 255), outline="black")
            draw.text((x0 + cell // 2 - 8, y0 + cell // 2 - 6), str(int(cm.counts[i, j])), fill="black")
    for j, lab in enumerate(cm.labels):
        draw.text((margin + j * cell + cell // 2 - 12, margin - 18), f"p:{lab}", fill="black")
    for i, lab in enumerate(cm.labels):
        draw.text((4, margin + i * cell + cell // 2 - 6), f"t:{lab}", fill="black")
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    img.save(p)
    return str(p)

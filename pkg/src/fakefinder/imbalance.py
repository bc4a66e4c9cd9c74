"""Cost-sensitive class weighting for imbalanced training data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import LABELS
from .errors import InvalidArgumentError

PROB_FLOOR = 1e-12


@dataclass
class ClassWeights:
    """Per-class positive multipliers applied inside the training loss."""

    weights: dict[str, float]

    def as_vector(self, labels: tuple[str, ...] = LABELS) -> np.ndarray:
        return np.array([self.weights[lab] for lab in labels], dtype=np.float64)


def class_weights(counts: dict[str, int]) -> ClassWeights:
    """Balanced class weights w_c = N / (K * n_c) from label counts.

    N is the total sample count and K the number of classes, so minority
    classes receive proportionally larger weights and the class-weighted
    sample mass sums back to N.
    """
    if len(counts) < 2:
        raise InvalidArgumentError(f"need at least 2 classes, got {len(counts)}")
    for label, n in counts.items():
        if n < 1:
            raise InvalidArgumentError(f"class {label!r} has non-positive count {n}")
    total = sum(counts.values())
    k = len(counts)
    return ClassWeights({label: total / (k * n) for label, n in counts.items()})


def weighted_cross_entropy(
    probs: np.ndarray,
    label: str,
    weights: ClassWeights,
    labels: tuple[str, ...] = LABELS,
) -> float:
    """Weighted negative log likelihood -w_label * ln(p_label).

    ``probs`` is a simplex vector aligned with ``labels``; probabilities are
    clipped to [1e-12, 1] before the log to keep the loss finite.
    """
    p = np.asarray(probs, dtype=np.float64)
    if label not in weights.weights:
        raise InvalidArgumentError(f"label {label!r} missing from weights")
    if label not in labels:
        raise InvalidArgumentError(f"label {label!r} missing from label order {labels}")
    if len(p) != len(labels):
        raise InvalidArgumentError(f"got {len(p)} probabilities for {len(labels)} labels")
    if abs(float(p.sum()) - 1.0) > 1e-6:
        raise InvalidArgumentError(f"probabilities sum to {p.sum()!r}, not 1")
    p_label = float(np.clip(p[labels.index(label)], PROB_FLOOR, 1.0))
    return -weights.weights[label] * float(np.log(p_label))

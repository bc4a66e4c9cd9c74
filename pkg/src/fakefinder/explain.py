"""Gradient-based relevance heatmaps for a classifier's decision.

Four explainers are provided: noise-averaged input saliency, activation
maps weighted by pooled gradients, the higher-order-gradient variant, and
the top-channel masked-score variant. Each produces a heatmap aligned to
the input crop, min-max normalized to [0, 1] with constant maps collapsing
to all zeros.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np
from PIL import Image

from .dataset import LABELS, save_tensor
from .errors import InvalidArgumentError
from .imageops import bilinear_resize, minmax_normalize

METHODS = ("smoothgrad", "gradcam", "gradcam_pp", "faster_scorecam")

EPS_DENOM = 1e-12
OVERLAY_ALPHA = 0.4


class ExplainableModel(Protocol):
    """What an explainer needs from a model."""

    def predict_proba(self, x: np.ndarray) -> np.ndarray: ...

    def input_gradient(self, x: np.ndarray, class_index: int) -> np.ndarray: ...

    def feature_gradient(self, x: np.ndarray, class_index: int): ...


@dataclass
class Heatmap:
    """Per-pixel relevance in [0, 1] aligned to the explained crop."""

    values: np.ndarray
    method: str
    target_class: str


def resolve_class(target: int | str) -> int:
    """Map a class label or index to the class index."""
    if isinstance(target, str):
        if target not in LABELS:
            raise InvalidArgumentError(f"unknown class {target!r}; have {LABELS}")
        return LABELS.index(target)
    if not 0 <= target < len(LABELS):
        raise InvalidArgumentError(f"class index {target} out of range")
    return int(target)


def saliency(model: ExplainableModel, x: np.ndarray, target: int | str) -> np.ndarray:
    """Raw gradient magnitude map: |d score / d x|, channel-reduced by max."""
    c = resolve_class(target)
    grad = model.input_gradient(np.asarray(x, dtype=np.float64), c)
    return np.abs(grad).max(axis=2)


def smoothgrad(
    model: ExplainableModel,
    x: np.ndarray,
    target: int | str,
    n: int = 25,
    sigma: float = 0.10,
    seed: int = 0,
) -> Heatmap:
    """Mean saliency over gaussian-perturbed copies of the input.

    ``sigma`` is a fraction of the input's dynamic range (max - min); with
    sigma 0 this reduces exactly to the normalized plain saliency.
    """
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    if sigma < 0:
        raise InvalidArgumentError(f"sigma must be >= 0, got {sigma}")
    c = resolve_class(target)
    arr = np.asarray(x, dtype=np.float64)
    rng = np.random.default_rng(seed)
    noise_std = sigma * float(arr.max() - arr.min())
    acc = np.zeros(arr.shape[:2])
    for _ in range(n):
        sample = arr if noise_std == 0 else arr + rng.normal(0.0, noise_std, arr.shape)
        acc += saliency(model, sample, c)
    return Heatmap(minmax_normalize(acc / n), "smoothgrad", LABELS[c])


def _cam_finish(raw: np.ndarray, shape: tuple[int, int], method: str, c: int) -> Heatmap:
    up = bilinear_resize(raw, shape[0], shape[1])
    return Heatmap(minmax_normalize(up), method, LABELS[c])


def gradcam(model: ExplainableModel, x: np.ndarray, target: int | str) -> Heatmap:
    """Activations weighted by their spatially pooled score gradients."""
    c = resolve_class(target)
    arr = np.asarray(x, dtype=np.float64)
    features, grad = model.feature_gradient(arr, c)
    alpha = grad.mean(axis=(0, 1))
    raw = np.maximum((features * alpha).sum(axis=2), 0.0)
    return _cam_finish(raw, arr.shape[:2], "gradcam", c)


def gradcam_pp(model: ExplainableModel, x: np.ndarray, target: int | str) -> Heatmap:
    """Per-pixel gradient weighting using second and third gradient powers."""
    c = resolve_class(target)
    arr = np.asarray(x, dtype=np.float64)
    features, grad = model.feature_gradient(arr, c)
    g2 = grad * grad
    g3 = g2 * grad
    denom = 2.0 * g2 + features.sum(axis=(0, 1)) * g3 + EPS_DENOM
    alpha = g2 / denom
    channel_w = (alpha * np.maximum(grad, 0.0)).sum(axis=(0, 1))
    raw = np.maximum((features * channel_w).sum(axis=2), 0.0)
    return _cam_finish(raw, arr.shape[:2], "gradcam_pp", c)


def faster_scorecam(
    model: ExplainableModel,
    x: np.ndarray,
    target: int | str,
    top_k: int = 8,
) -> Heatmap:
    """Masked-input class scores over the highest-variance channels.

    Channels are ranked by the spatial standard deviation of their
    activations; each of the top ``top_k`` becomes an upsampled [0, 1] mask
    whose weight is the class probability of the masked input.
    """
    c = resolve_class(target)
    arr = np.asarray(x, dtype=np.float64)
    features, _ = model.feature_gradient(arr, c)
    n_channels = features.shape[2]
    if not 1 <= top_k <= n_channels:
        raise InvalidArgumentError(f"top_k must be in [1, {n_channels}], got {top_k}")
    stds = features.std(axis=(0, 1))
    chosen = np.argsort(-stds, kind="stable")[:top_k]
    h, w = arr.shape[:2]
    raw = np.zeros((h, w))
    for k in chosen:
        mask = minmax_normalize(bilinear_resize(features[:, :, k], h, w))
        score = float(model.predict_proba(arr * mask[:, :, None])[c])
        raw += score * mask
    return Heatmap(minmax_normalize(np.maximum(raw, 0.0)), "faster_scorecam", LABELS[c])


def explain(
    model: ExplainableModel,
    x: np.ndarray,
    method: str,
    target: int | str,
    n: int = 25,
    sigma: float = 0.10,
    seed: int = 0,
    top_k: int = 8,
) -> Heatmap:
    """Dispatch to one of the named heatmap methods."""
    if method == "smoothgrad":
        return smoothgrad(model, x, target, n=n, sigma=sigma, seed=seed)
    if method == "gradcam":
        return gradcam(model, x, target)
    if method == "gradcam_pp":
        return gradcam_pp(model, x, target)
    if method == "faster_scorecam":
        return faster_scorecam(model, x, target, top_k=top_k)
    raise InvalidArgumentError(f"unknown method {method!r}; have {METHODS}")


# Heat colormap anchors: value -> RGB, linearly interpolated into 256 entries.
_COLOR_ANCHORS = (
    (0.00, (0, 0, 4)),
    (0.25, (87, 16, 110)),
    (0.50, (188, 55, 84)),
    (0.75, (249, 142, 9)),
    (1.00, (252, 255, 164)),
)


def _build_colormap() -> np.ndarray:
    lut = np.zeros((256, 3))
    positions = np.array([a[0] for a in _COLOR_ANCHORS])
    colors = np.array([a[1] for a in _COLOR_ANCHORS], dtype=np.float64)
    xs = np.linspace(0.0, 1.0, 256)
    for ch in range(3):
        lut[:, ch] = np.interp(xs, positions, colors[:, ch])
    return np.clip(np.rint(lut), 0, 255).astype(np.uint8)


COLORMAP = _build_colormap()


def overlay(heatmap: Heatmap, crop: np.ndarray, alpha: float = OVERLAY_ALPHA) -> np.ndarray:
    """Alpha-blend the colormapped heatmap over an RGB crop.

    Output pixel = (1 - alpha) * crop + alpha * colormap[round(v * 255)],
    rounded to uint8.
    """
    values = np.asarray(heatmap.values, dtype=np.float64)
    img = np.asarray(crop, dtype=np.float64)
    if values.shape != img.shape[:2]:
        raise InvalidArgumentError(
            f"heatmap {values.shape} does not align with crop {img.shape[:2]}"
        )
    idx = np.clip(np.rint(values * 255), 0, 255).astype(np.intp)
    colors = COLORMAP[idx].astype(np.float64)
    blended = (1.0 - alpha) * img + alpha * colors
    return np.clip(np.rint(blended), 0, 255).astype(np.uint8)


def write_overlay(heatmap: Heatmap, crop: np.ndarray, path: str | Path) -> str:
    """Render the blend and save it as a PNG file."""
    img = overlay(heatmap, crop)
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(img, mode="RGB").save(p)
    return str(p)


def write_heatmap(heatmap: Heatmap, path: str | Path) -> str:
    """Persist the raw heatmap values in the tensor format."""
    save_tensor(heatmap.values[:, :, None].astype("<f4"), path)
    return str(path)

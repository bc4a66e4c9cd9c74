"""Classifier models with explicit forward and gradient passes.

The production-scale feature extractors this pipeline can host plug in
behind the same interface; what ships here is a small seeded convnet that
keeps every numeric contract testable on one CPU. All math runs in
float64, and every gradient path is checked against finite differences in
the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidArgumentError

KERNEL = 3
STRIDE = 2


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _conv_patches(x: np.ndarray) -> np.ndarray:
    """Extract 3x3 stride-2 patches of a padded (B,H,W,C) batch.

    Returns (B, Ho, Wo, 3, 3, C) with Ho = ceil(H/2), Wo = ceil(W/2).
    """
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (KERNEL, KERNEL), axis=(1, 2))
    win = win[:, ::STRIDE, ::STRIDE]
    return np.ascontiguousarray(win.transpose(0, 1, 2, 4, 5, 3))


def _conv_forward(x, w, b):
    patches = _conv_patches(x)
    z = np.tensordot(patches, w, axes=([3, 4, 5], [0, 1, 2])) + b
    return z, patches


def _conv_backward_input(dz, w, in_shape):
    """Scatter patch gradients back onto the (padded) input grid."""
    b_, h, w_in = in_shape[0], in_shape[1], in_shape[2]
    dpatches = np.tensordot(dz, w, axes=([3], [3]))  # (B,Ho,Wo,3,3,Cin)
    dxp = np.zeros((b_, h + 2, w_in + 2, in_shape[3]))
    ho, wo = dz.shape[1], dz.shape[2]
    for ki in range(KERNEL):
        for kj in range(KERNEL):
            dxp[:, ki : ki + STRIDE * ho : STRIDE, kj : kj + STRIDE * wo : STRIDE, :] += (
                dpatches[:, :, :, ki, kj, :]
            )
    return dxp[:, 1:-1, 1:-1, :]


class TinyConvBackbone:
    """Three stride-2 conv+ReLU stages, seeded random initialization.

    For a 224x224x3 input the final activation map is 28x28x32. Any input
    whose sides are multiples of 8 works; the classifier head pools over
    whatever spatial extent comes out.
    """

    kind = "tiny"

    def __init__(self, seed: int = 0, in_channels: int = 3, stage_channels=(8, 16, 32)):
        self.seed = seed
        self.in_channels = in_channels
        self.stage_channels = tuple(stage_channels)
        self.params: dict[str, np.ndarray] = {}
        rng = np.random.default_rng(seed)
        cin = in_channels
        for i, cout in enumerate(self.stage_channels):
            scale = np.sqrt(2.0 / (KERNEL * KERNEL * cin))
            self.params[f"conv{i}_w"] = rng.normal(0.0, scale, (KERNEL, KERNEL, cin, cout))
            self.params[f"conv{i}_b"] = np.zeros(cout)
            cin = cout

    @property
    def feature_dim(self) -> int:
        return self.stage_channels[-1]

    def forward(self, x: np.ndarray):
        """Run all stages; returns (activations, cache for backward)."""
        a = np.asarray(x, dtype=np.float64)
        if a.ndim != 4:
            raise InvalidArgumentError(f"expected (B,H,W,C) input, got shape {a.shape}")
        cache = []
        for i in range(len(self.stage_channels)):
            z, patches = _conv_forward(a, self.params[f"conv{i}_w"], self.params[f"conv{i}_b"])
            cache.append({"in_shape": a.shape, "patches": patches, "z": z})
            a = np.maximum(z, 0.0)
        return a, cache

    def features(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache, dfeatures: np.ndarray, want_params: bool = False):
        """Backpropagate a gradient at the final activations.

        Returns (d_input, param_grads); param_grads is empty unless
        ``want_params`` is set.
        """
        grads: dict[str, np.ndarray] = {}
        da = np.asarray(dfeatures, dtype=np.float64)
        for i in reversed(range(len(self.stage_channels))):
            st = cache[i]
            dz = da * (st["z"] > 0.0)
            if want_params:
                grads[f"conv{i}_w"] = np.tensordot(
                    st["patches"], dz, axes=([0, 1, 2], [0, 1, 2])
                )
                grads[f"conv{i}_b"] = dz.sum(axis=(0, 1, 2))
            da = _conv_backward_input(dz, self.params[f"conv{i}_w"], st["in_shape"])
        return da, grads


@dataclass
class HeadConfig:
    dense_units: int = 256
    dropout_rate: float = 0.5
    classes: int = 2


class ClassifierHead:
    """Global average pool -> dense+ReLU -> dropout -> dense -> softmax.

    Parameters start at zero (giving uniform class probabilities); call
    :meth:`init_random` before training. Dropout applies only when a keep
    mask is passed in, i.e. only on training forward passes.
    """

    def __init__(self, feature_dim: int, config: HeadConfig | None = None):
        if feature_dim < 1:
            raise InvalidArgumentError(f"feature_dim must be >= 1, got {feature_dim}")
        self.config = config or HeadConfig()
        self.feature_dim = feature_dim
        u, c = self.config.dense_units, self.config.classes
        self.params = {
            "dense1_w": np.zeros((feature_dim, u)),
            "dense1_b": np.zeros(u),
            "dense2_w": np.zeros((u, c)),
            "dense2_b": np.zeros(c),
        }

    def init_random(self, rng: np.random.Generator) -> None:
        """He-scaled gaussian weights; biases stay zero."""
        for name in ("dense1_w", "dense2_w"):
            w = self.params[name]
            self.params[name] = rng.normal(0.0, np.sqrt(2.0 / w.shape[0]), w.shape)

    def forward_pooled(self, pooled: np.ndarray, dropout_mask: np.ndarray | None = None):
        """Head forward from pooled (B, feature_dim) vectors."""
        z1 = pooled @ self.params["dense1_w"] + self.params["dense1_b"]
        a1 = np.maximum(z1, 0.0)
        if dropout_mask is not None:
            keep = 1.0 - self.config.dropout_rate
            a1 = a1 * dropout_mask / keep
        logits = a1 @ self.params["dense2_w"] + self.params["dense2_b"]
        cache = {"pooled": pooled, "z1": z1, "a1": a1, "mask": dropout_mask}
        return logits, cache

    def forward(self, features: np.ndarray, dropout_mask: np.ndarray | None = None):
        """Head forward from (B, h, w, c) feature maps."""
        pooled = np.asarray(features, dtype=np.float64).mean(axis=(1, 2))
        logits, cache = self.forward_pooled(pooled, dropout_mask)
        cache["spatial"] = features.shape[1:3]
        return logits, cache

    def backward(self, cache, dlogits: np.ndarray):
        """Returns (param_grads, d_pooled) for a gradient at the logits."""
        grads = {
            "dense2_w": cache["a1"].T @ dlogits,
            "dense2_b": dlogits.sum(axis=0),
        }
        da1 = dlogits @ self.params["dense2_w"].T
        if cache["mask"] is not None:
            da1 = da1 * cache["mask"] / (1.0 - self.config.dropout_rate)
        dz1 = da1 * (cache["z1"] > 0.0)
        grads["dense1_w"] = cache["pooled"].T @ dz1
        grads["dense1_b"] = dz1.sum(axis=0)
        d_pooled = dz1 @ self.params["dense1_w"].T
        return grads, d_pooled


def build_head(feature_dim: int, config: HeadConfig | None = None) -> ClassifierHead:
    """Construct the classifier head for a backbone's channel count."""
    return ClassifierHead(feature_dim, config)


class FaceClassifier:
    """A backbone and head glued into one explainable model.

    Exposes batched inference plus the single-image gradient queries the
    explainers consume: the derivative of a class logit with respect to
    the input pixels or the final-stage activations. Inference passes never
    apply dropout, so repeated calls are identical.
    """

    def __init__(self, backbone: TinyConvBackbone, head: ClassifierHead):
        if head.feature_dim != backbone.feature_dim:
            raise InvalidArgumentError(
                f"head expects {head.feature_dim} channels, backbone has {backbone.feature_dim}"
            )
        self.backbone = backbone
        self.head = head

    def forward(self, x: np.ndarray):
        """Batched inference: (B,H,W,3) -> (features, logits)."""
        features, _ = self.backbone.forward(x)
        logits, _ = self.head.forward(features)
        return features, logits

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        """Class probabilities; accepts one image (H,W,3) or a batch."""
        arr = np.asarray(x, dtype=np.float64)
        single = arr.ndim == 3
        if single:
            arr = arr[None]
        _, logits = self.forward(arr)
        probs = softmax(logits)
        return probs[0] if single else probs

    def logits_from_features(self, features: np.ndarray) -> np.ndarray:
        """Head-only forward for one (h,w,c) feature map."""
        logits, _ = self.head.forward(np.asarray(features, dtype=np.float64)[None])
        return logits[0]

    def _onehot_grad(self, x: np.ndarray, class_index: int):
        arr = np.asarray(x, dtype=np.float64)[None]
        features, bcache = self.backbone.forward(arr)
        logits, hcache = self.head.forward(features)
        dlogits = np.zeros_like(logits)
        dlogits[0, class_index] = 1.0
        _, d_pooled = self.head.backward(hcache, dlogits)
        h, w = features.shape[1:3]
        dfeatures = np.broadcast_to(
            (d_pooled / (h * w))[:, None, None, :], features.shape
        )
        return features, bcache, dfeatures

    def feature_gradient(self, x: np.ndarray, class_index: int):
        """Returns (features, d logit_class / d features) for one image."""
        features, _, dfeatures = self._onehot_grad(x, class_index)
        return features[0], np.array(dfeatures[0])

    def input_gradient(self, x: np.ndarray, class_index: int) -> np.ndarray:
        """d logit_class / d input pixels for one (H,W,3) image."""
        _, bcache, dfeatures = self._onehot_grad(x, class_index)
        d_input, _ = self.backbone.backward(bcache, dfeatures)
        return d_input[0]


BackboneFactory = Callable[[int], TinyConvBackbone]

BACKBONES: dict[str, BackboneFactory] = {
    "tiny": lambda seed: TinyConvBackbone(seed=seed),
}


def make_backbone(kind: str, seed: int) -> TinyConvBackbone:
    """Instantiate a registered backbone by name."""
    if kind not in BACKBONES:
        raise InvalidArgumentError(f"unknown backbone {kind!r}; have {sorted(BACKBONES)}")
    return BACKBONES[kind](seed)

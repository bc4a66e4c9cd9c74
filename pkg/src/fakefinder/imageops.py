"""Shared raster operations: bilinear resampling and min-max normalization."""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError


def bilinear_resize(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resample an (H, W) or (H, W, C) image to (out_h, out_w) bilinearly.

    Uses corner-aligned coordinates: output pixel (i, j) samples source
    location (i * (H-1) / (out_h-1), j * (W-1) / (out_w-1)), so the four
    output corners reproduce the four source corners exactly. A source
    axis of length 1 is treated as constant along that axis. Returns
    float64; every output value is a convex combination of source values.
    """
    if out_h < 1 or out_w < 1:
        raise InvalidArgumentError(f"output size must be positive, got {out_h}x{out_w}")
    img = np.asarray(image, dtype=np.float64)
    if img.ndim not in (2, 3):
        raise InvalidArgumentError(f"expected 2D or 3D image, got ndim={img.ndim}")
    h, w = img.shape[:2]
    if h < 1 or w < 1:
        raise InvalidArgumentError("source image is empty")

    def axis_coords(n_src: int, n_dst: int) -> np.ndarray:
        if n_dst == 1 or n_src == 1:
            return np.zeros(n_dst)
        return np.arange(n_dst) * ((n_src - 1) / (n_dst - 1))

    ys = axis_coords(h, out_h)
    xs = axis_coords(w, out_w)
    y0 = np.minimum(np.floor(ys).astype(np.intp), h - 1)
    x0 = np.minimum(np.floor(xs).astype(np.intp), w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0).reshape(-1, 1)
    fx = (xs - x0).reshape(1, -1)
    if img.ndim == 3:
        fy = fy[..., None]
        fx = fx[..., None]

    top = img[np.ix_(y0, x0)] * (1 - fx) + img[np.ix_(y0, x1)] * fx
    bottom = img[np.ix_(y1, x0)] * (1 - fx) + img[np.ix_(y1, x1)] * fx
    return top * (1 - fy) + bottom * fy


def minmax_normalize(values: np.ndarray) -> np.ndarray:
    """Rescale an array to [0, 1]; a constant input maps to all zeros."""
    arr = np.asarray(values, dtype=np.float64)
    lo = arr.min()
    hi = arr.max()
    if hi == lo:
        return np.zeros_like(arr)
    return (arr - lo) / (hi - lo)

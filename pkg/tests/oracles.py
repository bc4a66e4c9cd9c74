"""Independent brute-force reference implementations for the test suite.

Everything here deliberately avoids the library's own code paths: plain
Python loops, list arithmetic, and exact rational math where possible.
"""

from fractions import Fraction
from statistics import fmean

import numpy as np


def frame_difference_slow(a, b) -> float:
    fa = [int(v) for v in np.asarray(a).reshape(-1)]
    fb = [int(v) for v in np.asarray(b).reshape(-1)]
    assert len(fa) == len(fb)
    return sum(abs(x - y) for x, y in zip(fa, fb)) / len(fa) / 255


def difference_curve_slow(frames) -> list[float]:
    return [frame_difference_slow(frames[i], frames[i + 1]) for i in range(len(frames) - 1)]


def smooth_slow(values, window: int) -> list[float]:
    r = window // 2
    n = len(values)
    return [fmean(values[max(0, i - r) : min(n, i + r + 1)]) for i in range(n)]


def local_maxima_slow(values, order: int) -> list[int]:
    n = len(values)
    out = set()
    for i in range(n):
        js = [j for j in range(i - order, i + order + 1) if j != i and 0 <= j < n]
        if js and all(values[i] > values[j] for j in js):
            out.add(i)
    start = 0
    for end in range(1, n + 1):
        if end == n or values[end] != values[start]:
            if (
                end - start >= 2
                and start - 1 >= 0
                and end < n
                and values[start] > values[start - 1]
                and values[start] > values[end]
            ):
                out.add(start)
            start = end
    return sorted(out)


def extract_keyframes_slow(frames, window: int, order: int):
    """Literal composition of the slow pieces plus the fallback rules."""
    sm = smooth_slow(difference_curve_slow(frames), window)
    maxima = local_maxima_slow(sm, order)
    if maxima:
        indices = [m + 1 for m in maxima]
    elif all(v == sm[0] for v in sm):
        indices = [len(frames) // 2]
    else:
        indices = [sm.index(max(sm)) + 1]
    scores = [sm[i - 1] for i in indices]
    return indices, scores


def bilinear_slow(image, out_h: int, out_w: int):
    """Scalar-loop corner-aligned bilinear resampling."""
    img = np.asarray(image, dtype=np.float64)
    squeeze = img.ndim == 2
    if squeeze:
        img = img[:, :, None]
    h, w, c = img.shape
    out = np.zeros((out_h, out_w, c))
    for i in range(out_h):
        for j in range(out_w):
            sy = 0.0 if (out_h == 1 or h == 1) else i * (h - 1) / (out_h - 1)
            sx = 0.0 if (out_w == 1 or w == 1) else j * (w - 1) / (out_w - 1)
            y0 = min(int(np.floor(sy)), h - 1)
            x0 = min(int(np.floor(sx)), w - 1)
            y1 = min(y0 + 1, h - 1)
            x1 = min(x0 + 1, w - 1)
            fy = sy - y0
            fx = sx - x0
            for k in range(c):
                top = img[y0, x0, k] * (1 - fx) + img[y0, x1, k] * fx
                bot = img[y1, x0, k] * (1 - fx) + img[y1, x1, k] * fx
                out[i, j, k] = top * (1 - fy) + bot * fy
    return out[:, :, 0] if squeeze else out


def minmax_slow(values):
    arr = np.asarray(values, dtype=np.float64)
    lo, hi = arr.min(), arr.max()
    if hi == lo:
        return np.zeros_like(arr)
    return (arr - lo) / (hi - lo)


def confusion_slow(y_true, y_pred, labels):
    tally = {(t, p): 0 for t in labels for p in labels}
    for t, p in zip(y_true, y_pred):
        tally[(t, p)] += 1
    return [[tally[(t, p)] for p in labels] for t in labels]


def gap_slow(features):
    """Global average pool by explicit per-channel loops."""
    f = np.asarray(features)
    h, w, c = f.shape
    out = []
    for k in range(c):
        total = 0.0
        for i in range(h):
            for j in range(w):
                total += float(f[i, j, k])
        out.append(total / (h * w))
    return np.array(out)


def class_weights_exact(counts: dict[str, int]) -> dict[str, float]:
    """Balanced weights via exact rational arithmetic."""
    total = sum(counts.values())
    k = len(counts)
    return {label: float(Fraction(total, k * n)) for label, n in counts.items()}


def scorecam_full_slow(model, x, class_index):
    """Masked-score relevance over every channel, all math by loops."""
    features, _ = model.feature_gradient(x, class_index)
    h, w = np.asarray(x).shape[:2]
    raw = np.zeros((h, w))
    for k in range(features.shape[2]):
        mask = minmax_slow(bilinear_slow(features[:, :, k], h, w))
        masked = np.asarray(x, dtype=np.float64) * mask[:, :, None]
        score = float(model.predict_proba(masked)[class_index])
        raw += score * mask
    raw = np.maximum(raw, 0.0)
    return minmax_slow(raw)

"""Keyframe selection from smoothed inter-frame difference curves.

A video's consecutive frames are compared with a normalized mean absolute
pixel difference, the resulting curve is smoothed with a centered moving
average, and keyframes are the frames sitting just after local maxima of
the smoothed curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError


@dataclass
class DifferenceCurve:
    """Consecutive-frame dissimilarities for one sequence.

    ``values[i]`` compares frames i and i+1 and lies in [0, 1].
    """

    values: np.ndarray
    smoothed: bool = False
    window: int = 1

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class KeyframeSet:
    """Selected frame indices with the smoothed scores that justified them."""

    indices: list[int]
    scores: list[float]
    params: tuple[int, int]  # (window, order)


def frame_difference(a: np.ndarray, b: np.ndarray) -> float:
    """Mean absolute pixel difference between two frames, scaled to [0, 1].

    Averages |a - b| / 255 over every pixel and channel.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise InvalidArgumentError(f"frame shapes differ: {a.shape} vs {b.shape}")
    return float(np.mean(np.abs(a.astype(np.float64) - b.astype(np.float64))) / 255.0)


def difference_curve(frames: np.ndarray | list[np.ndarray]) -> DifferenceCurve:
    """Build the raw (unsmoothed) difference curve for an ordered frame list."""
    n = len(frames)
    if n < 2:
        raise InvalidArgumentError(f"need at least 2 frames, got {n}")
    values = np.array(
        [frame_difference(frames[i], frames[i + 1]) for i in range(n - 1)]
    )
    return DifferenceCurve(values=values, smoothed=False, window=1)


def smooth(curve: DifferenceCurve, window: int) -> DifferenceCurve:
    """Centered moving average with windows that shrink at the boundaries.

    No padding is used: position i averages the curve over
    [max(0, i-r), min(n, i+r+1)) with r = window // 2, so output length
    equals input length. Window sums are correctly rounded (fsum), so equal
    value multisets always smooth to the identical float; downstream
    plateau detection relies on that.
    """
    if window < 1 or window % 2 == 0:
        raise InvalidArgumentError(f"window must be a positive odd integer, got {window}")
    n = len(curve.values)
    if window > 2 * n - 1:
        raise InvalidArgumentError(
            f"window {window} exceeds 2*len-1 = {2 * n - 1} for curve of length {n}"
        )
    r = window // 2
    v = curve.values
    values = np.array(
        [
            math.fsum(v[max(0, i - r) : min(n, i + r + 1)]) / (min(n, i + r + 1) - max(0, i - r))
            for i in range(n)
        ]
    )
    return DifferenceCurve(values=values, smoothed=True, window=window)


def local_maxima(curve: DifferenceCurve, order: int) -> list[int]:
    """Indices of local maxima of the curve under a neighborhood radius.

    Index i qualifies when values[i] strictly exceeds every in-range value
    within distance ``order``. Additionally, for a plateau (a maximal run of
    two or more equal values) that strictly exceeds both values adjacent to
    the run, the leftmost run index qualifies. Result is sorted ascending.
    """
    if order < 1:
        raise InvalidArgumentError(f"order must be >= 1, got {order}")
    v = np.asarray(curve.values, dtype=np.float64)
    n = len(v)
    out = set()
    for i in range(n):
        lo = max(0, i - order)
        hi = min(n, i + order + 1)
        neighbors = np.concatenate([v[lo:i], v[i + 1 : hi]])
        if neighbors.size and np.all(v[i] > neighbors):
            out.add(i)
    # plateau pass: runs of equal values, length >= 2
    start = 0
    for end in range(1, n + 1):
        if end == n or v[end] != v[start]:
            run_len = end - start
            if (
                run_len >= 2
                and start - 1 >= 0
                and end < n
                and v[start] > v[start - 1]
                and v[start] > v[end]
            ):
                out.add(start)
            start = end
    return sorted(out)


def extract_keyframes(
    frames: np.ndarray | list[np.ndarray], window: int = 9, order: int = 3
) -> KeyframeSet:
    """Select keyframes for an ordered frame sequence.

    Composes difference_curve -> smooth -> local_maxima. Curve index i maps
    to frame index i+1 (the latter frame of the differing pair). When the
    smoothed curve has no local maxima: if it is exactly constant the middle
    frame index floor(n/2) is chosen, otherwise the frame after the leftmost
    curve maximum. The result is never empty for sequences of 3+ frames.
    """
    n = len(frames)
    if n < 3:
        raise InvalidArgumentError(f"need at least 3 frames, got {n}")
    curve = smooth(difference_curve(frames), window)
    maxima = local_maxima(curve, order)
    v = curve.values
    if maxima:
        indices = [m + 1 for m in maxima]
    elif np.all(v == v[0]):
        indices = [n // 2]
    else:
        indices = [int(np.argmax(v)) + 1]
    scores = [float(v[i - 1]) for i in indices]
    return KeyframeSet(indices=indices, scores=scores, params=(window, order))

import numpy as np
import pytest

from fakefinder.errors import InvalidArgumentError
from fakefinder.keyframe import (
    DifferenceCurve,
    difference_curve,
    extract_keyframes,
    frame_difference,
    local_maxima,
    smooth,
)

from oracles import (
    difference_curve_slow,
    extract_keyframes_slow,
    frame_difference_slow,
    local_maxima_slow,
    smooth_slow,
)


def _frames(*arrays):
    return [np.asarray(a, dtype=np.uint8) for a in arrays]


class TestFrameDifference:
    def test_identical_frames_zero(self):
        f = np.full((4, 4, 3), 77, dtype=np.uint8)
        assert frame_difference(f, f) == 0.0

    def test_full_swing_is_one(self):
        a = np.zeros((3, 5, 3), dtype=np.uint8)
        b = np.full((3, 5, 3), 255, dtype=np.uint8)
        assert frame_difference(a, b) == 1.0

    def test_hand_computed_single_channel(self):
        a = np.array([[0, 255], [255, 0]], dtype=np.uint8)
        b = np.array([[255, 255], [255, 0]], dtype=np.uint8)
        assert frame_difference(a, b) == pytest.approx(0.25, abs=0)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(InvalidArgumentError):
            frame_difference(np.zeros((2, 2)), np.zeros((3, 2)))

    def test_matches_slow_reference(self):
        rng = np.random.default_rng(0)
        a = rng.integers(0, 256, (6, 5, 3)).astype(np.uint8)
        b = rng.integers(0, 256, (6, 5, 3)).astype(np.uint8)
        assert frame_difference(a, b) == pytest.approx(frame_difference_slow(a, b), abs=1e-12)


class TestDifferenceCurve:
    def test_constant_sequence(self):
        f = np.full((4, 4, 3), 10, dtype=np.uint8)
        curve = difference_curve([f, f, f])
        np.testing.assert_array_equal(curve.values, [0.0, 0.0])
        assert not curve.smoothed

    def test_alternating_extremes(self):
        lo = np.zeros((2, 2, 3), dtype=np.uint8)
        hi = np.full((2, 2, 3), 255, dtype=np.uint8)
        curve = difference_curve([lo, hi, lo])
        np.testing.assert_array_equal(curve.values, [1.0, 1.0])

    def test_random_sequence_matches_pixel_loop(self):
        rng = np.random.default_rng(1)
        frames = [rng.integers(0, 256, (4, 4, 3)).astype(np.uint8) for _ in range(5)]
        curve = difference_curve(frames)
        np.testing.assert_allclose(curve.values, difference_curve_slow(frames), atol=1e-12)

    def test_too_few_frames(self):
        with pytest.raises(InvalidArgumentError):
            difference_curve([np.zeros((2, 2, 3), dtype=np.uint8)])


class TestSmooth:
    def test_window_one_is_identity(self):
        curve = DifferenceCurve(np.array([0.1, 0.5, 0.2]))
        out = smooth(curve, 1)
        np.testing.assert_array_equal(out.values, curve.values)
        assert out.smoothed and out.window == 1

    def test_hand_computed_shrinking_windows(self):
        curve = DifferenceCurve(np.array([0.0, 3.0, 0.0, 3.0, 0.0]))
        out = smooth(curve, 3)
        np.testing.assert_allclose(out.values, [1.5, 1.0, 2.0, 1.0, 1.5], atol=1e-12)

    def test_constant_curve_unchanged(self):
        curve = DifferenceCurve(np.full(7, 0.25))
        np.testing.assert_allclose(smooth(curve, 5).values, np.full(7, 0.25), atol=1e-15)

    @pytest.mark.parametrize("window", [0, -3, 2, 4])
    def test_rejects_even_or_nonpositive_window(self, window):
        with pytest.raises(InvalidArgumentError):
            smooth(DifferenceCurve(np.array([0.1, 0.2, 0.3])), window)

    def test_rejects_oversized_window(self):
        with pytest.raises(InvalidArgumentError):
            smooth(DifferenceCurve(np.array([0.1, 0.2])), 5)

    def test_bounds_never_widen(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            values = rng.random(rng.integers(3, 15))
            curve = DifferenceCurve(values)
            out = smooth(curve, 3)
            assert out.values.max() <= values.max() + 1e-12
            assert out.values.min() >= values.min() - 1e-12

    def test_matches_slow_reference(self):
        rng = np.random.default_rng(3)
        values = rng.random(11)
        out = smooth(DifferenceCurve(values), 5)
        np.testing.assert_allclose(out.values, smooth_slow(list(values), 5), atol=1e-12)


class TestLocalMaxima:
    def test_two_sharp_peaks(self):
        curve = DifferenceCurve(np.array([0.0, 1.0, 0.0, 2.0, 0.0]))
        assert local_maxima(curve, 1) == [1, 3]

    def test_constant_has_none(self):
        assert local_maxima(DifferenceCurve(np.full(6, 0.4)), 1) == []

    def test_plateau_returns_leftmost(self):
        assert local_maxima(DifferenceCurve(np.array([0.0, 2.0, 2.0, 0.0])), 1) == [1]

    def test_order_widens_the_neighborhood(self):
        curve = DifferenceCurve(np.array([0.0, 1.0, 0.0, 2.0, 0.0]))
        assert local_maxima(curve, 2) == [3]

    def test_boundary_peak_counts(self):
        assert local_maxima(DifferenceCurve(np.array([2.0, 1.0, 0.0])), 1) == [0]

    def test_rejects_bad_order(self):
        with pytest.raises(InvalidArgumentError):
            local_maxima(DifferenceCurve(np.array([0.1, 0.2])), 0)

    def test_matches_slow_reference_on_random_curves(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            n = int(rng.integers(2, 20))
            values = np.round(rng.random(n), 2)  # rounding provokes plateaus
            order = int(rng.integers(1, 4))
            got = local_maxima(DifferenceCurve(values), order)
            assert got == local_maxima_slow(list(values), order)


class TestExtractKeyframes:
    def test_single_content_jump(self):
        a = np.full((4, 4, 3), 10, dtype=np.uint8)
        b = np.full((4, 4, 3), 200, dtype=np.uint8)
        frames = [a] * 5 + [b] * 5
        keyset = extract_keyframes(frames, window=1, order=1)
        assert keyset.indices == [5]
        assert keyset.params == (1, 1)

    def test_constant_video_falls_back_to_middle(self):
        f = np.full((4, 4, 3), 50, dtype=np.uint8)
        keyset = extract_keyframes([f] * 10, window=1, order=1)
        assert keyset.indices == [5]

    def test_monotone_drift_falls_back_to_peak(self):
        frames = [np.full((4, 4, 3), v, dtype=np.uint8) for v in (0, 10, 30, 60, 100)]
        keyset = extract_keyframes(frames, window=1, order=1)
        slow_idx, slow_scores = extract_keyframes_slow(frames, 1, 1)
        assert keyset.indices == slow_idx
        np.testing.assert_allclose(keyset.scores, slow_scores, atol=1e-12)

    def test_needs_three_frames(self):
        f = np.zeros((2, 2, 3), dtype=np.uint8)
        with pytest.raises(InvalidArgumentError):
            extract_keyframes([f, f])

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        frames = [rng.integers(0, 256, (6, 6, 3)).astype(np.uint8) for _ in range(12)]
        a = extract_keyframes(frames, window=3, order=2)
        b = extract_keyframes(frames, window=3, order=2)
        assert a.indices == b.indices and a.scores == b.scores

    def test_uniform_brightness_shift_changes_nothing(self):
        rng = np.random.default_rng(6)
        frames = [rng.integers(0, 150, (5, 5, 3)).astype(np.uint8) for _ in range(10)]
        shifted = [(f.astype(np.int16) + 100).astype(np.uint8) for f in frames]
        a = extract_keyframes(frames, window=3, order=1)
        b = extract_keyframes(shifted, window=3, order=1)
        assert a.indices == b.indices
        np.testing.assert_allclose(a.scores, b.scores, atol=1e-12)

    def test_indices_always_interior_and_nonempty(self):
        rng = np.random.default_rng(7)
        for _ in range(40):
            n = int(rng.integers(3, 20))
            frames = [rng.integers(0, 256, (4, 4, 3)).astype(np.uint8) for _ in range(n)]
            window = int(rng.choice([1, 3, 5]))
            window = min(window, 2 * (n - 1) - 1)
            keyset = extract_keyframes(frames, window=window, order=int(rng.integers(1, 4)))
            assert keyset.indices, "fallback must guarantee at least one keyframe"
            assert all(1 <= i <= n - 1 for i in keyset.indices)
            assert keyset.indices == sorted(set(keyset.indices))
            assert len(keyset.indices) == len(keyset.scores)

    def test_agrees_with_brute_force_composition(self):
        rng = np.random.default_rng(8)
        for _ in range(60):
            n = int(rng.integers(3, 25))
            frames = [rng.integers(0, 256, (4, 4, 3)).astype(np.uint8) for _ in range(n)]
            max_window = 2 * (n - 1) - 1
            window = min(int(rng.choice([1, 3, 5, 7, 9])), max_window)
            order = int(rng.integers(1, 5))
            keyset = extract_keyframes(frames, window=window, order=order)
            slow_idx, slow_scores = extract_keyframes_slow(frames, window, order)
            assert keyset.indices == slow_idx
            np.testing.assert_allclose(keyset.scores, slow_scores, atol=1e-9)

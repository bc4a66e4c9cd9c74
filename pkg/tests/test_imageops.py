import numpy as np
import pytest

from fakefinder.errors import InvalidArgumentError
from fakefinder.imageops import bilinear_resize, minmax_normalize

from oracles import bilinear_slow


def test_identity_resize_is_exact_copy():
    rng = np.random.default_rng(0)
    img = rng.integers(0, 256, (17, 23, 3)).astype(np.uint8)
    out = bilinear_resize(img, 17, 23)
    assert np.array_equal(out, img.astype(np.float64))


def test_checkerboard_upsample_corners_and_center():
    src = np.array([[0.0, 255.0], [255.0, 0.0]])
    out = bilinear_resize(src, 224, 224)
    assert out[0, 0] == 0.0
    assert out[0, -1] == 255.0
    assert out[-1, 0] == 255.0
    assert out[-1, -1] == 0.0
    center = out[112, 112]
    assert 0.0 < center < 255.0


def test_constant_region_stays_constant():
    src = np.full((448, 448, 3), 93.0)
    out = bilinear_resize(src, 224, 224)
    assert np.all(out == 93.0)


def test_output_range_within_source_range():
    rng = np.random.default_rng(1)
    for _ in range(10):
        src = rng.random((5, 7, 3)) * 255
        out = bilinear_resize(src, 31, 13)
        assert out.min() >= src.min() - 1e-9
        assert out.max() <= src.max() + 1e-9


def test_matches_scalar_loop_reference():
    rng = np.random.default_rng(2)
    for shape, out_shape in [((4, 5, 3), (9, 7)), ((3, 3), (8, 2)), ((1, 6), (4, 4)), ((6, 1, 2), (3, 5))]:
        src = rng.random(shape)
        fast = bilinear_resize(src, *out_shape)
        slow = bilinear_slow(src, *out_shape)
        np.testing.assert_allclose(fast, slow, rtol=0, atol=1e-12)


def test_single_pixel_source_broadcasts():
    out = bilinear_resize(np.array([[7.0]]), 5, 5)
    assert np.all(out == 7.0)


def test_rejects_bad_sizes_and_shapes():
    with pytest.raises(InvalidArgumentError):
        bilinear_resize(np.zeros((4, 4)), 0, 5)
    with pytest.raises(InvalidArgumentError):
        bilinear_resize(np.zeros(4), 2, 2)


def test_minmax_constant_maps_to_zeros():
    assert np.all(minmax_normalize(np.full((3, 3), 4.2)) == 0.0)


def test_minmax_hits_zero_and_one_and_is_idempotent():
    rng = np.random.default_rng(3)
    arr = rng.random((6, 6)) * 11 - 3
    out = minmax_normalize(arr)
    assert out.min() == 0.0
    assert out.max() == 1.0
    np.testing.assert_array_equal(minmax_normalize(out), out)


def test_minmax_invariant_to_positive_scaling():
    rng = np.random.default_rng(4)
    arr = rng.random((5, 5))
    np.testing.assert_allclose(minmax_normalize(arr * 37.5), minmax_normalize(arr), atol=1e-12)

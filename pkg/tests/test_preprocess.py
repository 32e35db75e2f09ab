import math

import numpy as np
import pytest
from conftest import textured, to_frame
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from flowroi import DenoiseParams, Frame, SequenceError, Shift, denoise, register
from flowroi.preprocess import (
    apply_shift,
    bilateral_filter,
    estimate_shift,
    median_filter,
)


# scalar reference filters, written without numpy vectorization
def _median_ref(img, radius):
    h, w = len(img), len(img[0])
    out = [[0] * w for _ in range(h)]
    for y in range(h):
        for x in range(w):
            vals = []
            for dy in range(-radius, radius + 1):
                for dx in range(-radius, radius + 1):
                    yy = min(max(y + dy, 0), h - 1)
                    xx = min(max(x + dx, 0), w - 1)
                    vals.append(img[yy][xx])
            vals.sort()
            out[y][x] = vals[len(vals) // 2]
    return out


def _bilateral_ref(img, radius, ss, sr):
    h, w = len(img), len(img[0])
    out = [[0.0] * w for _ in range(h)]
    for y in range(h):
        for x in range(w):
            num = den = 0.0
            c = img[y][x]
            for dy in range(-radius, radius + 1):
                for dx in range(-radius, radius + 1):
                    v = img[min(max(y + dy, 0), h - 1)][min(max(x + dx, 0), w - 1)]
                    wt = math.exp(-(dx * dx + dy * dy) / (2 * ss * ss) - (v - c) ** 2 / (2 * sr * sr))
                    num += wt * v
                    den += wt
            out[y][x] = num / den
    return out


def test_constant_frame_is_unchanged():
    f = Frame(np.full((20, 24), 77, dtype=np.uint8), 8)
    assert denoise(f) == f
    g = Frame(np.full((10, 10), 40000, dtype=np.uint16), 16)
    assert denoise(g) == g


def test_median_of_worked_neighbourhood():
    win = np.array([[1, 2, 100], [4, 5, 6], [7, 8, 9]], dtype=np.uint8)
    assert median_filter(win, 1)[1, 1] == sorted(win.ravel().tolist())[4] == 6


def test_disabled_denoise_is_identity():
    f = to_frame(textured((16, 16), 0))
    assert denoise(f, DenoiseParams(enabled=False)) is f


def test_denoise_matches_scalar_reference():
    rng = np.random.default_rng(3)
    img = rng.integers(0, 256, size=(14, 17)).astype(np.uint8)
    p = DenoiseParams()
    med = _median_ref(img.tolist(), p.median_radius)
    assert np.array_equal(median_filter(img, p.median_radius), np.array(med))
    norm = (np.array(med, dtype=np.float64) / 255.0).tolist()
    ref = np.array(_bilateral_ref(norm, p.bilateral_radius, p.bilateral_sigma_spatial, p.bilateral_sigma_range))
    fast = bilateral_filter(np.array(norm), p.bilateral_radius, p.bilateral_sigma_spatial, p.bilateral_sigma_range)
    assert np.allclose(fast, ref, atol=1e-12)
    expected = np.clip(np.rint(ref * 255), 0, 255).astype(np.uint8)
    assert np.array_equal(denoise(Frame(img, 8), p).pixels, expected)


def test_impulses_removed_and_blob_preserved():
    yy, xx = np.mgrid[0:64, 0:64]
    blob = 60 + 120 * np.exp(-((xx - 32) ** 2 + (yy - 32) ** 2) / (2 * 8.0**2))
    img = np.rint(blob).astype(np.uint8)
    noisy = img.copy()
    rng = np.random.default_rng(0)
    ys, xs = rng.integers(2, 62, size=(2, 40))
    noisy[ys, xs] = rng.choice([0, 255], size=40)
    out = denoise(Frame(noisy, 8)).pixels.astype(int)
    assert np.all(np.abs(out[ys, xs] - img[ys, xs].astype(int)) <= 6)
    peak_in = img.max() - 60
    peak_out = out[28:37, 28:37].max() - 60
    assert peak_out >= 0.9 * peak_in


@given(arrays(np.uint8, st.tuples(st.integers(3, 12), st.integers(3, 12))), st.integers(0, 3))
def test_median_commutes_with_monotone_remap(img, seed):
    lut = np.sort(np.random.default_rng(seed).integers(0, 256, size=256)).astype(np.uint8)
    assert np.array_equal(median_filter(lut[img], 1), lut[median_filter(img, 1)])


@given(arrays(np.uint8, st.tuples(st.integers(3, 16), st.integers(3, 16))))
def test_denoise_keeps_shape_depth_and_range(img):
    out = denoise(Frame(img, 8))
    assert out.shape == img.shape and out.depth == 8
    assert out.pixels.min() >= img.min() and out.pixels.max() <= img.max()


def test_identical_frames_have_zero_shift():
    f = to_frame(textured((128, 128), 1))
    s = estimate_shift(f, f)
    assert (s.dx, s.dy) == (0, 0)
    assert s.reliable


def test_cyclic_shift_recovered_exactly():
    f = to_frame(textured((128, 128), 2))
    moved = Frame(np.roll(f.pixels, (-2, 3), axis=(0, 1)), 8)
    s = estimate_shift(f, moved)
    assert (s.dx, s.dy) == (3, -2)
    back = apply_shift(moved, s)
    assert np.array_equal(back.pixels[16:-16, 16:-16], f.pixels[16:-16, 16:-16])


def test_independent_noise_is_low_confidence():
    rng = np.random.default_rng(5)
    a = Frame(rng.integers(0, 256, size=(128, 128)), 8)
    b = Frame(rng.integers(0, 256, size=(128, 128)), 8)
    s = estimate_shift(a, b)
    assert s.confidence < 1.5 and not s.reliable
    aligned, applied = register(a, b)
    assert (applied.dx, applied.dy) == (0, 0)
    assert aligned == b


@given(st.integers(-10, 10), st.integers(-10, 10), st.integers(0, 5))
def test_shift_antisymmetry(dx, dy, seed):
    big = textured((200, 200), seed)
    a = to_frame(big[30:158, 30:158])
    # content of b sits at +d relative to a
    b = to_frame(big[30 - dy : 158 - dy, 30 - dx : 158 - dx])
    ab = estimate_shift(a, b)
    ba = estimate_shift(b, a)
    assert (ab.dx, ab.dy) == (dx, dy)
    assert (ba.dx, ba.dy) == (-dx, -dy)


def test_shift_then_inverse_restores_interior():
    f = to_frame(textured((64, 64), 7))
    s = Shift(4, -3)
    out = apply_shift(apply_shift(f, s), -s)
    assert np.array_equal(out.pixels[4:-4, 4:-4], f.pixels[4:-4, 4:-4])
    assert apply_shift(f, Shift(0, 0)) == f


def test_apply_shift_replicates_edges():
    f = Frame(np.arange(16, dtype=np.uint8).reshape(4, 4), 8)
    out = apply_shift(f, Shift(1, 0)).pixels
    assert out[:, :3].tolist() == f.pixels[:, 1:].tolist()
    assert out[:, 3].tolist() == f.pixels[:, 3].tolist()


def test_max_shift_bound_enforced():
    f = to_frame(textured((64, 64), 0))
    with pytest.raises(ValueError):
        estimate_shift(f, f, max_shift=16)
    with pytest.raises(SequenceError):
        estimate_shift(f, to_frame(textured((64, 32), 0)), max_shift=4)


@pytest.mark.parametrize("kwargs", [{"median_radius": 0}, {"bilateral_sigma_range": 0.0}, {"bilateral_radius": 0}])
def test_invalid_denoise_params(kwargs):
    with pytest.raises(ValueError):
        DenoiseParams(**kwargs)

import numpy as np
import pytest
from conftest import textured, to_frame
from scipy import ndimage

from flowroi import (
    FlowField,
    FlowParams,
    SequenceError,
    SyntheticSpec,
    compute_flow,
    denoise,
    generate_synthetic,
)
from flowroi.flow import flow_step, polynomial_expansion, read_flo, write_flo


def translated_pair(shape, d, seed, margin=24):
    """(prev, next) where next is prev's content moved by d = (dx, dy)."""
    h, w = shape
    big = textured((h + 2 * margin, w + 2 * margin), seed)
    rows, cols = np.mgrid[0:h, 0:w].astype(np.float64) + margin
    prev = big[margin : margin + h, margin : margin + w]
    nxt = ndimage.map_coordinates(big, [rows - d[1], cols - d[0]], order=3, mode="nearest")
    return to_frame(prev), to_frame(nxt)


def interior_epe(flow, d, border=16):
    u = flow.u[border:-border, border:-border]
    v = flow.v[border:-border, border:-border]
    return float(np.mean(np.hypot(u - d[0], v - d[1])))


def _lsq_oracle(img, y, x, poly_n, sigma):
    """Direct weighted least squares on one neighbourhood (edge-replicated)."""
    n = poly_n // 2
    rows, vals, wts = [], [], []
    for dy in range(-n, n + 1):
        for dx in range(-n, n + 1):
            yy = min(max(y + dy, 0), img.shape[0] - 1)
            xx = min(max(x + dx, 0), img.shape[1] - 1)
            rows.append([1, dx, dy, dx * dx, dy * dy, dx * dy])
            vals.append(img[yy, xx])
            wts.append(np.exp(-(dx * dx + dy * dy) / (2 * sigma * sigma)))
    a = np.array(rows, dtype=float)
    sw = np.sqrt(np.array(wts))
    sol, *_ = np.linalg.lstsq(a * sw[:, None], np.array(vals) * sw, rcond=None)
    return sol


def test_expansion_of_constant():
    c = polynomial_expansion(np.full((20, 20), 0.37))
    sl = np.s_[3:-3, 3:-3]
    for arr in (c.axx, c.axy, c.ayy, c.bx, c.by):
        assert np.allclose(arr[sl], 0.0, atol=1e-12)
    assert np.allclose(c.c[sl], 0.37)


def test_expansion_of_linear_ramp():
    xx = np.tile(np.arange(30, dtype=float), (30, 1))
    c = polynomial_expansion(0.01 * xx)
    sl = np.s_[3:-3, 3:-3]
    assert np.allclose(c.bx[sl], 0.01, atol=1e-6)
    assert np.allclose(c.by[sl], 0.0, atol=1e-6)
    for arr in (c.axx, c.axy, c.ayy):
        assert np.allclose(arr[sl], 0.0, atol=1e-6)


def test_expansion_of_quadratic():
    xx = np.tile(np.arange(12, dtype=float) - 6, (12, 1))
    c = polynomial_expansion(xx**2)
    assert np.allclose(c.axx[3:-3, 3:-3], 1.0, atol=1e-3)


@pytest.mark.parametrize("poly_n,sigma", [(5, 1.1), (7, 1.5)])
def test_expansion_matches_direct_least_squares(poly_n, sigma):
    rng = np.random.default_rng(0)
    img = rng.random((24, 24))
    c = polynomial_expansion(img, poly_n, sigma)
    for y, x in rng.integers(0, 24, size=(10, 2)):
        sol = _lsq_oracle(img, y, x, poly_n, sigma)
        got = [c.c[y, x], c.bx[y, x], c.by[y, x], c.axx[y, x], c.ayy[y, x], 2 * c.axy[y, x]]
        assert np.allclose(got, sol, atol=1e-9)


def test_identical_frames_give_zero_flow():
    f = to_frame(textured((64, 64), 3))
    c = polynomial_expansion(f)
    out = flow_step(c, c, FlowField.zeros((64, 64)), 15)
    assert np.all(out.uv == 0)
    assert np.all(compute_flow(f, f).uv == 0)


def test_blank_frames_give_finite_zero_flow():
    f = to_frame(np.full((64, 64), 100.0))
    flow = compute_flow(f, f)
    assert np.all(np.isfinite(flow.uv)) and np.all(flow.uv == 0)
    g = to_frame(np.full((64, 64), 101.0))
    assert np.all(np.isfinite(compute_flow(f, g).uv))


def test_single_level_step_on_translation():
    prev, nxt = translated_pair((96, 96), (2.0, 0.0), seed=4)
    ca, cb = polynomial_expansion(prev), polynomial_expansion(nxt)
    flow = FlowField.zeros((96, 96))
    for _ in range(3):
        flow = flow_step(ca, cb, flow, 15)
    u, v = flow.u[16:-16, 16:-16], flow.v[16:-16, 16:-16]
    assert 1.5 <= u.mean() <= 2.5
    assert -0.3 <= v.mean() <= 0.3


def test_pyramid_flow_on_large_translation():
    d = (4.0, -3.0)
    prev, nxt = translated_pair((128, 128), d, seed=5)
    assert interior_epe(compute_flow(prev, nxt), d) < 0.5


def test_moving_blob_on_static_background():
    spec = SyntheticSpec(
        n_cells=1, speed_range=(3.0, 3.0), n_frames=2, width=256, height=256, seed=3, low_contrast_fraction=0.0
    )
    seq, truth = generate_synthetic(spec)
    a, b = denoise(seq[0]), denoise(seq[1])
    mag = compute_flow(a, b).magnitude()
    inside = truth.masks[0]
    assert mag[inside].max() >= 1.0
    assert np.median(mag[~inside]) < 0.2


def test_intensity_scaling_leaves_flow_unchanged():
    base = textured((96, 96), 6, amplitude=20.0, level=60.0)
    d = (1.5, 0.5)
    rows, cols = np.mgrid[0:96, 0:96].astype(float)
    moved = ndimage.map_coordinates(base, [rows - d[1], cols - d[0]], order=3, mode="nearest")
    f1 = compute_flow(base / 255.0, moved / 255.0)
    f2 = compute_flow(2 * base / 255.0, 2 * moved / 255.0)
    assert float(np.max(np.hypot(f1.u - f2.u, f1.v - f2.v))) < 1e-3


def test_dimension_mismatch():
    with pytest.raises(SequenceError):
        compute_flow(np.zeros((40, 40)), np.zeros((40, 41)))


@pytest.mark.parametrize(
    "kwargs", [{"window_size": 14}, {"poly_n": 4}, {"pyramid_levels": 0}, {"pyramid_scale": 1.0}, {"window_size": 1}]
)
def test_invalid_flow_params(kwargs):
    with pytest.raises(ValueError):
        FlowParams(**kwargs)


def test_flo_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    flow = FlowField(rng.normal(size=(5, 7, 2)).astype(np.float32).astype(np.float64))
    write_flo(flow, tmp_path / "a.flo")
    data = (tmp_path / "a.flo").read_bytes()
    assert data[:4] == b"FLO1" and len(data) == 12 + 5 * 7 * 8
    assert np.array_equal(read_flo(tmp_path / "a.flo").uv, flow.uv)

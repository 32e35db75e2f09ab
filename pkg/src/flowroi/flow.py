"""
Dense two-frame optical flow by polynomial expansion (Farnebäck).

Each image neighbourhood is approximated by a quadratic polynomial
``f(x) ~ x^T A x + b^T x + c``. Under a translation ``d`` the linear
coefficient changes by ``-2 A d``, which gives a small linear system per
pixel; the systems are averaged over a window, solved, and the estimate
is refined coarse-to-fine on a Gaussian pyramid.

Coordinates are ``x`` = column, ``y`` = row; flow ``(u, v)`` is the motion
of image content from ``prev`` to ``next`` in pixels.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .errors import SequenceError
from .sequence import Frame

__all__ = [
    "FlowField",
    "FlowParams",
    "PolyCoeffs",
    "polynomial_expansion",
    "flow_step",
    "compute_flow",
    "read_flo",
    "write_flo",
]

# Both inputs are divided by their joint 1st-99th percentile spread before
# expansion, so the regularizer below is in contrast-normalized units and the
# flow does not change when intensities are multiplied by a constant.
# Weakly structured neighbourhoods are pulled towards zero motion instead of
# amplifying noise.
DET_REGULARIZER = 5.0 / 255.0**4
NORMALIZE_PERCENTILES = (1.0, 99.0)
MIN_LEVEL_SIZE = 32


@dataclass(frozen=True)
class FlowParams:
    pyramid_levels: int = 3
    pyramid_scale: float = 0.5
    window_size: int = 15
    iterations: int = 3
    poly_n: int = 5
    poly_sigma: float = 1.1

    def __post_init__(self):
        if self.pyramid_levels < 1:
            raise ValueError("pyramid_levels must be >= 1")
        if not 0 < self.pyramid_scale < 1:
            raise ValueError("pyramid_scale must lie in (0, 1)")
        for name in ("window_size", "poly_n"):
            v = getattr(self, name)
            if v < 3 or v % 2 == 0:
                raise ValueError(f"{name} must be odd and >= 3, got {v}")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.poly_sigma <= 0:
            raise ValueError("poly_sigma must be positive")


class FlowField:
    """Per-pixel displacement vectors, stored as an ``(h, w, 2)`` float array."""

    __slots__ = ("uv",)

    def __init__(self, uv: np.ndarray):
        uv = np.asarray(uv, dtype=np.float64)
        if uv.ndim != 3 or uv.shape[2] != 2:
            raise ValueError(f"flow must have shape (h, w, 2), got {uv.shape}")
        self.uv = uv

    @classmethod
    def zeros(cls, shape) -> FlowField:
        return cls(np.zeros((*shape, 2)))

    @property
    def u(self) -> np.ndarray:
        return self.uv[..., 0]

    @property
    def v(self) -> np.ndarray:
        return self.uv[..., 1]

    @property
    def width(self) -> int:
        return self.uv.shape[1]

    @property
    def height(self) -> int:
        return self.uv.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.uv.shape[:2]

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.u, self.v)

    def __repr__(self):
        return f"FlowField({self.width}x{self.height})"


class PolyCoeffs(NamedTuple):
    """Quadratic model per pixel: ``A = [[axx, axy], [axy, ayy]]``, ``b = (bx, by)``."""

    axx: np.ndarray
    axy: np.ndarray
    ayy: np.ndarray
    bx: np.ndarray
    by: np.ndarray
    c: np.ndarray


def _as_float_image(img) -> np.ndarray:
    if isinstance(img, Frame):
        return img.normalized()
    return np.asarray(img, dtype=np.float64)


def _contrast_normalize(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    joint = np.concatenate([a.ravel(), b.ravel()])
    lo, hi = np.percentile(joint, NORMALIZE_PERCENTILES)
    spread = hi - lo
    if spread <= 0:
        spread = joint.max() - joint.min()
    if spread <= 0:
        return a, b
    return a / spread, b / spread


def _poly_kernels(poly_n: int, poly_sigma: float):
    n = poly_n // 2
    x = np.arange(-n, n + 1, dtype=np.float64)
    g = np.exp(-(x * x) / (2 * poly_sigma * poly_sigma))
    g /= g.sum()
    # weighted normal matrix for the basis (1, x, y, x^2, y^2, xy)
    xx, yy = np.meshgrid(x, x)
    basis = np.stack([np.ones_like(xx), xx, yy, xx * xx, yy * yy, xx * yy], -1).reshape(-1, 6)
    w = np.outer(g, g).ravel()
    gram = basis.T @ (w[:, None] * basis)
    return g, x, np.linalg.inv(gram)


def polynomial_expansion(image, poly_n: int = 5, poly_sigma: float = 1.1) -> PolyCoeffs:
    """Weighted least-squares quadratic fit around every pixel.

    The Gaussian applicability is separable, so all six basis projections
    are computed with 1-D correlations. Borders use edge replication.
    """
    f = _as_float_image(image)
    g, x, ginv = _poly_kernels(poly_n, poly_sigma)
    k0, k1, k2 = g, g * x, g * x * x

    def corr(arr, kern, axis):
        return ndimage.correlate1d(arr, kern, axis=axis, mode="nearest")

    # columns (x) first, then rows (y)
    r0 = corr(f, k0, 1)
    r1 = corr(f, k1, 1)
    r2 = corr(f, k2, 1)
    proj = np.stack(
        [
            corr(r0, k0, 0),  # 1
            corr(r1, k0, 0),  # x
            corr(r0, k1, 0),  # y
            corr(r2, k0, 0),  # x^2
            corr(r0, k2, 0),  # y^2
            corr(r1, k1, 0),  # xy
        ],
        axis=-1,
    )
    r = proj @ ginv.T
    return PolyCoeffs(
        axx=r[..., 3],
        axy=r[..., 5] / 2.0,
        ayy=r[..., 4],
        bx=r[..., 1],
        by=r[..., 2],
        c=r[..., 0],
    )


def _sample(arr: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    return ndimage.map_coordinates(arr, [rows, cols], order=1, mode="nearest")


def flow_step(prev: PolyCoeffs, next: PolyCoeffs, prior: FlowField, window_size: int) -> FlowField:
    """One refinement of ``prior`` from the two expansions.

    The next-frame coefficients are sampled at ``x + prior(x)``; with
    ``A`` the mean of both quadratic terms, each pixel contributes
    ``A d = -(b2 - b1) / 2 + A prior``. These constraints are box-averaged
    over ``window_size`` in normal-equation form and solved for the full
    displacement ``d``.
    """
    h, w = prev.c.shape
    if next.c.shape != (h, w) or prior.shape != (h, w):
        raise SequenceError("coefficient grids and prior flow must share dimensions")
    u0, v0 = prior.u, prior.v
    if np.any(prior.uv):
        rows, cols = np.mgrid[0:h, 0:w].astype(np.float64)
        nxt = PolyCoeffs(*(_sample(a, rows + v0, cols + u0) for a in next))
    else:
        nxt = next

    axx = 0.5 * (prev.axx + nxt.axx)
    axy = 0.5 * (prev.axy + nxt.axy)
    ayy = 0.5 * (prev.ayy + nxt.ayy)
    rx = -0.5 * (nxt.bx - prev.bx) + axx * u0 + axy * v0
    ry = -0.5 * (nxt.by - prev.by) + axy * u0 + ayy * v0

    def box(a):
        return ndimage.uniform_filter(a, size=window_size, mode="nearest")

    # A is symmetric: accumulate A^T A and A^T r
    g11 = box(axx * axx + axy * axy)
    g12 = box(axx * axy + axy * ayy)
    g22 = box(axy * axy + ayy * ayy)
    h1 = box(axx * rx + axy * ry)
    h2 = box(axy * rx + ayy * ry)

    det = g11 * g22 - g12 * g12 + DET_REGULARIZER
    u = (g22 * h1 - g12 * h2) / det
    v = (g11 * h2 - g12 * h1) / det
    return FlowField(np.stack([u, v], axis=-1))


def _resample(arr: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Bilinear resampling with pixel-centre alignment."""
    h, w = arr.shape
    nh, nw = shape
    r = (np.arange(nh) + 0.5) * (h / nh) - 0.5
    c = (np.arange(nw) + 0.5) * (w / nw) - 0.5
    rr, cc = np.meshgrid(r, c, indexing="ij")
    return ndimage.map_coordinates(arr, [rr, cc], order=1, mode="nearest")


def build_pyramid(image: np.ndarray, levels: int, scale: float) -> list[np.ndarray]:
    """Gaussian pyramid, finest level first; stops before any side drops below 32 px."""
    pyr = [image]
    for _ in range(levels - 1):
        h, w = pyr[-1].shape
        nh, nw = int(h * scale), int(w * scale)
        if min(nh, nw) < MIN_LEVEL_SIZE:
            break
        blurred = ndimage.gaussian_filter(pyr[-1], 1.0, mode="nearest")
        pyr.append(_resample(blurred, (nh, nw)))
    return pyr


def compute_flow(prev, next, params: FlowParams = FlowParams()) -> FlowField:
    """Coarse-to-fine dense flow from ``prev`` to ``next``.

    Inputs may be Frames (normalized to [0, 1]) or float arrays.
    """
    a = _as_float_image(prev)
    b = _as_float_image(next)
    if a.shape != b.shape:
        raise SequenceError(f"frame size mismatch: {a.shape} vs {b.shape}")
    a, b = _contrast_normalize(a, b)
    pa = build_pyramid(a, params.pyramid_levels, params.pyramid_scale)
    pb = build_pyramid(b, len(pa), params.pyramid_scale)

    flow = None
    for level in range(len(pa) - 1, -1, -1):
        shape = pa[level].shape
        if flow is None:
            flow = FlowField.zeros(shape)
        else:
            fh, fw = flow.shape
            up = np.stack(
                [_resample(flow.u, shape) * (shape[1] / fw), _resample(flow.v, shape) * (shape[0] / fh)],
                axis=-1,
            )
            flow = FlowField(up)
        ca = polynomial_expansion(pa[level], params.poly_n, params.poly_sigma)
        cb = polynomial_expansion(pb[level], params.poly_n, params.poly_sigma)
        for _ in range(params.iterations):
            flow = flow_step(ca, cb, flow, params.window_size)
    return flow


def write_flo(flow: FlowField, path) -> None:
    """``FLO1`` dump: magic, width/height as int32 LE, then (u, v) float32 LE pairs."""
    with open(path, "wb") as fh:
        fh.write(b"FLO1" + struct.pack("<ii", flow.width, flow.height))
        fh.write(flow.uv.astype("<f4").tobytes())


def read_flo(path) -> FlowField:
    data = Path(path).read_bytes()
    if data[:4] != b"FLO1":
        raise SequenceError(f"{path}: not a FLO1 file")
    w, h = struct.unpack_from("<ii", data, 4)
    uv = np.frombuffer(data, dtype="<f4", count=w * h * 2, offset=12)
    return FlowField(uv.reshape(h, w, 2).astype(np.float64))

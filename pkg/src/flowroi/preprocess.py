"""
Noise suppression and global translational stabilization.

Denoising is a median filter followed by a bilateral filter, so that
impulse noise is gone before it can distort the bilateral range weights.
Registration estimates an integer translation by phase correlation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import SequenceError
from .sequence import Frame

__all__ = [
    "DenoiseParams",
    "Shift",
    "denoise",
    "median_filter",
    "bilateral_filter",
    "estimate_shift",
    "apply_shift",
    "register",
]

MIN_CONFIDENCE = 1.5


@dataclass(frozen=True)
class DenoiseParams:
    enabled: bool = True
    median_radius: int = 1
    bilateral_sigma_spatial: float = 2.0
    bilateral_sigma_range: float = 0.04
    bilateral_radius: int = 2

    def __post_init__(self):
        if self.median_radius < 1 or self.bilateral_radius < 1:
            raise ValueError("filter radii must be >= 1")
        if self.bilateral_sigma_spatial <= 0 or self.bilateral_sigma_range <= 0:
            raise ValueError("bilateral sigmas must be positive")


@dataclass(frozen=True)
class Shift:
    """Integer translation of a moving frame relative to its reference."""

    dx: int = 0
    dy: int = 0
    confidence: float = float("inf")

    @property
    def reliable(self) -> bool:
        return self.confidence >= MIN_CONFIDENCE

    def __neg__(self) -> Shift:
        return Shift(-self.dx, -self.dy, self.confidence)


def median_filter(image: np.ndarray, radius: int) -> np.ndarray:
    return ndimage.median_filter(image, size=2 * radius + 1, mode="nearest")


def bilateral_filter(image: np.ndarray, radius: int, sigma_spatial: float, sigma_range: float) -> np.ndarray:
    """Bilateral filter of a float image with edge-replicated borders.

    ``sigma_range`` is in the units of ``image``.
    """
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape
    padded = np.pad(img, radius, mode="edge")
    num = np.zeros_like(img)
    den = np.zeros_like(img)
    inv_s = -0.5 / sigma_spatial**2
    inv_r = -0.5 / sigma_range**2
    for oy in range(-radius, radius + 1):
        for ox in range(-radius, radius + 1):
            nb = padded[radius + oy : radius + oy + h, radius + ox : radius + ox + w]
            wgt = np.exp(inv_s * (ox * ox + oy * oy) + inv_r * (nb - img) ** 2)
            num += wgt * nb
            den += wgt
    return num / den


def denoise(frame: Frame, params: DenoiseParams = DenoiseParams()) -> Frame:
    """Median then bilateral filtering; identity when disabled."""
    if not params.enabled:
        return frame
    med = median_filter(frame.pixels, params.median_radius)
    scale = frame.max_value
    smooth = bilateral_filter(
        med.astype(np.float64) / scale,
        params.bilateral_radius,
        params.bilateral_sigma_spatial,
        params.bilateral_sigma_range,
    )
    out = np.clip(np.rint(smooth * scale), 0, scale).astype(frame.pixels.dtype)
    return Frame(out, frame.depth)


def _next_pow2(n: int) -> int:
    return 1 << (int(n) - 1).bit_length()


def _prepared_spectrum(img: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    h, w = img.shape
    win = np.outer(np.hanning(h), np.hanning(w)) if min(h, w) > 2 else 1.0
    x = (img - img.mean()) * win
    ph, pw = shape
    if (ph, pw) != (h, w):
        x = np.pad(x, ((0, ph - h), (0, pw - w)), mode="edge")
    return np.fft.rfft2(x)


def correlation_surface(reference: np.ndarray, moving: np.ndarray) -> np.ndarray:
    """Phase-correlation surface; its peak sits at the shift of ``moving``."""
    h, w = reference.shape
    shape = (_next_pow2(h), _next_pow2(w))
    fr = _prepared_spectrum(reference.astype(np.float64), shape)
    fm = _prepared_spectrum(moving.astype(np.float64), shape)
    cross = fm * np.conj(fr)
    mag = np.abs(cross)
    cross = np.where(mag > 1e-12, cross / np.maximum(mag, 1e-12), 0.0)
    return np.fft.irfft2(cross, s=shape)


def estimate_shift(reference: Frame, moving: Frame, max_shift: int = 16) -> Shift:
    """Integer translation of ``moving`` w.r.t. ``reference`` by phase correlation.

    The search is limited to signed shifts in ``[-max_shift, max_shift]`` on
    both axes. ``confidence`` is the peak height divided by the highest
    value outside the peak's 3x3 neighbourhood within the search window.
    """
    if reference.shape != moving.shape:
        raise SequenceError(f"frame size mismatch: {reference.shape} vs {moving.shape}")
    h, w = reference.shape
    if max_shift < 0 or (min(h, w) >= 8 and max_shift >= min(h, w) / 4):
        raise ValueError(f"max_shift must be < min(width, height)/4, got {max_shift}")
    surf = correlation_surface(reference.normalized(), moving.normalized())
    ph, pw = surf.shape
    offs = np.arange(-max_shift, max_shift + 1)
    window = surf[np.ix_(offs % ph, offs % pw)]
    iy, ix = np.unravel_index(np.argmax(window), window.shape)
    peak = window[iy, ix]
    rest = window.copy()
    rest[max(iy - 1, 0) : iy + 2, max(ix - 1, 0) : ix + 2] = -np.inf
    second = rest.max() if np.isfinite(rest).any() else 0.0
    if peak <= 0:
        confidence = 1.0
    elif second <= 0:
        confidence = float("inf")
    else:
        confidence = max(float(peak / second), 1.0)
    return Shift(int(offs[ix]), int(offs[iy]), confidence)


def apply_shift(frame: Frame, shift: Shift) -> Frame:
    """Translate ``frame`` by ``(-dx, -dy)``, replicating edge pixels."""
    if shift.dx == 0 and shift.dy == 0:
        return frame
    h, w = frame.shape
    rows = np.clip(np.arange(h) + shift.dy, 0, h - 1)
    cols = np.clip(np.arange(w) + shift.dx, 0, w - 1)
    return Frame(frame.pixels[np.ix_(rows, cols)], frame.depth)


def register(reference: Frame, moving: Frame, max_shift: int = 16) -> tuple[Frame, Shift]:
    """Align ``moving`` onto ``reference``.

    Low-confidence estimates (blank or pure-noise frames) fall back to no
    translation; the returned Shift is the one actually applied.
    """
    shift = estimate_shift(reference, moving, max_shift)
    if not shift.reliable:
        shift = Shift(0, 0, shift.confidence)
    return apply_shift(moving, shift), shift

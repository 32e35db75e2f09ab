"""
Reversible integer 5/3 wavelet transform (lifting, symmetric extension).

Level ``k`` splits the previous low-pass band into ``LL`` (ceil x ceil),
``HL`` (horizontal high-pass), ``LH`` (vertical high-pass) and ``HH``.
Forward followed by inverse is the identity on integers.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cache

import numpy as np
from scipy import ndimage

from ..errors import CodecError
from ..sequence import Frame

__all__ = [
    "SubbandGrid",
    "dwt_forward",
    "dwt_inverse",
    "map_mask_to_subbands",
    "lift_forward",
    "lift_inverse",
    "synthesis_norms",
    "band_weight_shifts",
]

SYNTHESIS_HALF_LENGTH = 2


def _neighbours(d: np.ndarray, n_even: int):
    """Left/right detail neighbours of every even sample (whole-sample mirror)."""
    left = np.concatenate([d[:1], d[: n_even - 1]])
    right = d[:n_even] if d.shape[0] >= n_even else np.concatenate([d, d[-1:]])
    return left, right


def lift_forward(x: np.ndarray):
    """One 5/3 analysis step along axis 0. Returns ``(low, high)``."""
    n = x.shape[0]
    even, odd = x[0::2], x[1::2]
    if n == 1:
        return even.copy(), odd.copy()
    ne, no = even.shape[0], odd.shape[0]
    right = even[1 : no + 1] if ne > no else np.concatenate([even[1:], even[-1:]])
    d = odd - ((even[:no] + right) >> 1)
    left_d, right_d = _neighbours(d, ne)
    s = even + ((left_d + right_d + 2) >> 2)
    return s, d


def lift_inverse(s: np.ndarray, d: np.ndarray) -> np.ndarray:
    ne, no = s.shape[0], d.shape[0]
    out = np.empty((ne + no,) + s.shape[1:], dtype=np.int64)
    if no == 0:
        out[:] = s
        return out
    left_d, right_d = _neighbours(d, ne)
    even = s - ((left_d + right_d + 2) >> 2)
    right = even[1 : no + 1] if ne > no else np.concatenate([even[1:], even[-1:]])
    out[0::2] = even
    out[1::2] = d + ((even[:no] + right) >> 1)
    return out


@dataclass
class SubbandGrid:
    """Wavelet coefficients.

    ``details[k]`` holds ``(HL, LH, HH)`` of level ``k + 1`` (finest first);
    ``ll`` is the final low-pass band.
    """

    ll: np.ndarray
    details: list

    @property
    def levels(self) -> int:
        return len(self.details)

    def bands(self) -> list:
        """All subbands, coarse to fine: LL, then HL/LH/HH from the deepest level up."""
        out = [self.ll]
        for hl, lh, hh in reversed(self.details):
            out.extend([hl, lh, hh])
        return out

    def shapes(self) -> list:
        return [b.shape for b in self.bands()]

    def flatten(self) -> np.ndarray:
        return np.concatenate([b.ravel() for b in self.bands()])

    @classmethod
    def from_flat(cls, flat: np.ndarray, shapes) -> SubbandGrid:
        bands, pos = [], 0
        for h, w in shapes:
            bands.append(flat[pos : pos + h * w].reshape(h, w))
            pos += h * w
        ll, rest = bands[0], bands[1:]
        details = [tuple(rest[i : i + 3]) for i in range(0, len(rest), 3)]
        return cls(ll, details[::-1])

    @property
    def size(self) -> int:
        return sum(b.size for b in self.bands())


def subband_shapes(height: int, width: int, levels: int) -> list:
    """Shapes of :meth:`SubbandGrid.bands` for an image of the given size."""
    dims = []
    h, w = height, width
    for _ in range(levels):
        hl, hh_ = (h + 1) // 2, h // 2
        wl, wh = (w + 1) // 2, w // 2
        dims.append([(hl, wh), (hh_, wl), (hh_, wh)])
        h, w = hl, wl
    shapes = [(h, w)]
    for level in reversed(dims):
        shapes.extend(level)
    return shapes


def check_levels(height: int, width: int, levels: int) -> None:
    if levels < 1:
        raise CodecError("dwt_levels must be >= 1")
    if height < (1 << levels) or width < (1 << levels):
        raise CodecError(f"{width}x{height} frame is too small for {levels} wavelet levels")


def dwt_forward(frame, levels: int) -> SubbandGrid:
    """Forward transform of a Frame or integer array."""
    img = frame.pixels if isinstance(frame, Frame) else np.asarray(frame)
    check_levels(img.shape[0], img.shape[1], levels)
    ll = img.astype(np.int64)
    details = []
    for _ in range(levels):
        lo, hi = lift_forward(ll.T)  # along rows
        lo, hi = lo.T, hi.T
        ll, lh = lift_forward(lo)  # along columns
        hl, hh = lift_forward(hi)
        details.append((hl, lh, hh))
    return SubbandGrid(ll, details)


def dwt_inverse(grid: SubbandGrid) -> np.ndarray:
    """Inverse transform; returns an int64 array (no clamping)."""
    ll = np.asarray(grid.ll, dtype=np.int64)
    for hl, lh, hh in reversed(grid.details):
        lo = lift_inverse(ll, np.asarray(lh, dtype=np.int64))
        hi = lift_inverse(np.asarray(hl, dtype=np.int64), np.asarray(hh, dtype=np.int64))
        ll = lift_inverse(lo.T, hi.T).T
    return ll


@cache
def _norms_1d(levels: int) -> tuple:
    """L2 norms of the 1-D synthesis responses: ``(low[k], high[k])`` for k = 1..levels."""
    n = 1 << (levels + 4)
    amp = 1 << 24
    low, high = [], []
    for k in range(1, levels + 1):
        for band, out in (("low", low), ("high", high)):
            sizes = []
            m = n
            for _ in range(k):
                sizes.append(((m + 1) // 2, m // 2))
                m = (m + 1) // 2
            s = np.zeros(sizes[-1][0], dtype=np.int64)
            d = np.zeros(sizes[-1][1], dtype=np.int64)
            if band == "low":
                s[s.shape[0] // 2] = amp
            else:
                d[d.shape[0] // 2] = amp
            x = lift_inverse(s, d)
            for ne, no in reversed(sizes[:-1]):
                x = lift_inverse(x, np.zeros(no, dtype=np.int64))
            out.append(float(np.sqrt(np.sum((x / amp) ** 2))))
    return tuple(low), tuple(high)


def synthesis_norms(levels: int) -> list:
    """Pixel-domain L2 norm of a unit coefficient, per band in :meth:`SubbandGrid.bands` order."""
    low, high = _norms_1d(levels)
    norms = [low[levels - 1] ** 2]
    for k in range(levels, 0, -1):
        lo, hi = low[k - 1], high[k - 1]
        norms.extend([hi * lo, lo * hi, hi * hi])
    return norms


def band_weight_shifts(levels: int) -> list:
    """Integer log2 weights that equalize the distortion contribution of a bitplane across bands."""
    norms = synthesis_norms(levels)
    ref = min(norms)
    return [max(0, int(round(np.log2(n / ref)))) for n in norms]


def _downsample_any(mask: np.ndarray) -> np.ndarray:
    h, w = mask.shape
    padded = np.zeros((h + (h & 1), w + (w & 1)), dtype=bool)
    padded[:h, :w] = mask
    return padded.reshape(padded.shape[0] // 2, 2, padded.shape[1] // 2, 2).any(axis=(1, 3))


def map_mask_to_subbands(mask: np.ndarray, levels: int) -> list:
    """RoI masks in the wavelet domain, one per level (finest first).

    Level ``k`` takes the pixel mask reduced ``k`` times by 2x2 "any" and
    dilates it by the synthesis half-length (2 for 5/3). Lifting makes a
    level-``k`` sample depend on at most ``ceil(h / 2) + 1`` coefficients
    around it when level ``k - 1`` needs a halo of ``h``; that recursion
    never exceeds 2, so every coefficient that feeds an RoI pixel is marked.
    Each subband of level ``k`` uses the top-left part of the level mask.
    """
    cur = np.asarray(mask, dtype=bool)
    struct = np.ones((2 * SYNTHESIS_HALF_LENGTH + 1,) * 2, dtype=bool)
    out = []
    for _ in range(levels):
        cur = _downsample_any(cur)
        out.append(ndimage.binary_dilation(cur, struct) if cur.any() else cur.copy())
    return out


def band_masks(mask: np.ndarray, levels: int, shapes) -> list:
    """Per-band masks in :meth:`SubbandGrid.bands` order."""
    per_level = map_mask_to_subbands(mask, levels)
    out = []
    for i, (h, w) in enumerate(shapes):
        level = levels if i == 0 else levels - (i - 1) // 3
        out.append(per_level[level - 1][:h, :w])
    return out

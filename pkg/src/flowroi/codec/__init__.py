"""
Wavelet codec with scaling-based RoI priority.

RoI coefficients are multiplied by ``2**scaling_factor`` before embedded
bitplane coding, so their planes are sent before most of the background.
The encoder stops when the file reaches ``floor(raw_bytes / rate)``
bytes; the RoI mask travels inside the container. Samples are centred on
zero (minus ``2**(depth - 1)``) before the transform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import CorruptStreamError, InfeasibleRateError
from ..sequence import Frame
from .container import HEADER_SIZE, PAYLOAD_PREFIX, RoiBitstream
from .dwt import (
    SubbandGrid,
    band_masks,
    band_weight_shifts,
    check_levels,
    dwt_forward,
    dwt_inverse,
    map_mask_to_subbands,
    subband_shapes,
)
from .entropy import RESERVE, decode_coefficients, encode_coefficients
from .maskcode import decode_mask, encode_mask

__all__ = [
    "CodecParams",
    "RoiBitstream",
    "SubbandGrid",
    "dwt_forward",
    "dwt_inverse",
    "map_mask_to_subbands",
    "encode",
    "decode",
    "encode_uniform",
    "byte_budget",
    "HEADER_ALLOWANCE",
]

HEADER_ALLOWANCE = 64


@dataclass(frozen=True)
class CodecParams:
    scaling_factor: int = 5
    compression_rate: float = 40.0
    dwt_levels: int = 5
    lossless: bool = False

    def __post_init__(self):
        if not 1 <= self.scaling_factor <= 10:
            raise ValueError(f"scaling_factor must lie in [1, 10], got {self.scaling_factor}")
        if not self.compression_rate > 1:
            raise ValueError(f"compression_rate must be > 1, got {self.compression_rate}")
        if self.dwt_levels < 1:
            raise ValueError("dwt_levels must be >= 1")


def byte_budget(raw_bytes: int, compression_rate: float) -> int:
    """Total file budget ``floor(raw_bytes / rate)``."""
    return int(math.floor(raw_bytes / compression_rate))


def _dc_offset(depth: int) -> int:
    return 1 << (depth - 1)


def _levels_for(frame: Frame, levels: int) -> int:
    check_levels(frame.height, frame.width, levels)
    return levels


def _scaled_coefficients(grid: SubbandGrid, masks, weights, shift: int) -> np.ndarray:
    """Magnitudes shifted by the band weight, plus ``shift`` inside the RoI."""
    parts = []
    for band, m, wgt in zip(grid.bands(), masks, weights):
        mag = np.abs(band.astype(np.int64)) << wgt
        if m.any():
            mag = np.where(m, mag << shift, mag)
        parts.append(np.where(band < 0, -mag, mag).ravel())
    return np.concatenate(parts)


def encode(frame: Frame, mask: np.ndarray | None, params: CodecParams = CodecParams(), max_bytes: int | None = None) -> RoiBitstream:
    """Encode ``frame`` with RoI priority on ``mask``.

    ``max_bytes`` overrides the rate-derived file budget (used to cut the
    embedded stream at arbitrary lengths); it is ignored in lossless mode.
    """
    h, w = frame.shape
    levels = _levels_for(frame, params.dwt_levels)
    if mask is None:
        mask = np.zeros((h, w), dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (h, w):
        raise ValueError(f"mask shape {mask.shape} does not match frame {(h, w)}")

    grid = dwt_forward(frame.pixels.astype(np.int64) - _dc_offset(frame.depth), levels)
    shapes = grid.shapes()
    weights = band_weight_shifts(levels)
    coeffs = _scaled_coefficients(grid, band_masks(mask, levels, shapes), weights, params.scaling_factor)
    mask_segment = encode_mask(mask)

    if params.lossless:
        budget = None
    else:
        total = byte_budget(frame.raw_bytes, params.compression_rate) if max_bytes is None else int(max_bytes)
        budget = total - HEADER_SIZE - len(mask_segment) - PAYLOAD_PREFIX.size
        minimum = HEADER_SIZE + len(mask_segment) + PAYLOAD_PREFIX.size + RESERVE
        if budget < RESERVE:
            raise InfeasibleRateError(
                f"budget of {total} bytes cannot hold header and mask; minimum achievable size is {minimum} bytes",
                minimum,
            )
    data, n_symbols, n_planes = encode_coefficients(coeffs, shapes, budget, weights)
    payload = PAYLOAD_PREFIX.pack(n_symbols, n_planes) + data
    return RoiBitstream(
        width=w,
        height=h,
        depth=frame.depth,
        dwt_levels=levels,
        scaling_factor=params.scaling_factor,
        compression_rate=None if params.lossless else float(params.compression_rate),
        mask_segment=mask_segment,
        payload=payload,
    )


def encode_uniform(frame: Frame, params: CodecParams = CodecParams(), max_bytes: int | None = None) -> RoiBitstream:
    """Baseline without RoI: the same codec with an empty mask."""
    return encode(frame, None, params, max_bytes)


def decode(stream) -> tuple[Frame, np.ndarray]:
    """Decode a :class:`RoiBitstream` (or its bytes) into ``(frame, mask)``."""
    if not isinstance(stream, RoiBitstream):
        stream = RoiBitstream.from_bytes(stream)
    h, w, levels = stream.height, stream.width, stream.dwt_levels
    if h < (1 << levels) or w < (1 << levels):
        raise CorruptStreamError("header declares more wavelet levels than the size allows")
    mask = decode_mask(stream.mask_segment, h, w)
    n_symbols, n_planes = PAYLOAD_PREFIX.unpack_from(stream.payload)
    shapes = subband_shapes(h, w, levels)
    weights = band_weight_shifts(levels)
    coeffs, ok = decode_coefficients(stream.payload[PAYLOAD_PREFIX.size :], shapes, n_planes, n_symbols, weights)
    if not ok:
        raise CorruptStreamError("entropy decoder desynchronized (terminal marker mismatch)")

    # undo RoI scaling and band weights; shifting magnitudes rounds toward zero
    s = stream.scaling_factor
    pos = 0
    for m, wgt in zip(band_masks(mask, levels, shapes), weights):
        seg = coeffs[pos : pos + m.size].reshape(m.shape)
        total = np.where(m, wgt + s, wgt)
        seg[...] = np.sign(seg) * (np.abs(seg) >> total)
        pos += m.size
    img = dwt_inverse(SubbandGrid.from_flat(coeffs, shapes)) + _dc_offset(stream.depth)
    maxval = (1 << stream.depth) - 1
    img = np.clip(img, 0, maxval).astype(np.uint8 if stream.depth == 8 else np.uint16)
    return Frame(img, stream.depth), mask

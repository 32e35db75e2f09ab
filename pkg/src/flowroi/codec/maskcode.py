"""
RoI mask coding.

Two interchangeable representations, chosen per frame by size:

* ``RLE`` - row-major run lengths as LEB128 varints, alternating
  background/RoI and starting with a (possibly empty) background run;
* ``CONTEXT`` - the bitmap coded pixel by pixel with the binary range
  coder, each pixel conditioned on ten already-coded neighbours::

        . X X X .        row y-2
        X X X X X        row y-1
        X X ?            row y

The segment starts with a one-byte method tag.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ..errors import CorruptStreamError
from .entropy import PROB_INIT, _dec_bit, _enc_bit, _shift_low

RLE = 0
CONTEXT = 1
N_CONTEXTS = 1 << 10

__all__ = ["RLE", "CONTEXT", "encode_mask", "decode_mask", "rle_encode", "rle_decode", "encode_varint", "decode_varint"]


def encode_varint(value: int, out: bytearray) -> None:
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return


def decode_varint(data: bytes, pos: int) -> tuple[int, int]:
    value = shift = 0
    while True:
        if pos >= len(data):
            raise CorruptStreamError("mask segment ends inside a varint")
        byte = data[pos]
        pos += 1
        value |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return value, pos
        shift += 7
        if shift > 63:
            raise CorruptStreamError("varint too long")


def rle_encode(mask: np.ndarray) -> bytes:
    """Varint run lengths, without the method tag."""
    flat = np.asarray(mask, dtype=bool).ravel()
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate([[0], change, [flat.size]])
    runs = np.diff(bounds).tolist()
    if flat.size and flat[0]:
        runs.insert(0, 0)
    out = bytearray()
    for r in runs:
        encode_varint(int(r), out)
    return bytes(out)


def rle_decode(data: bytes, height: int, width: int) -> np.ndarray:
    n = height * width
    flat = np.zeros(n, dtype=bool)
    pos = total = 0
    value = False
    while pos < len(data):
        run, pos = decode_varint(data, pos)
        if total + run > n:
            raise CorruptStreamError("mask runs exceed the image size")
        if value:
            flat[total : total + run] = True
        total += run
        value = not value
    if total != n:
        raise CorruptStreamError(f"mask runs cover {total} of {n} pixels")
    return flat.reshape(height, width)


@njit(cache=True, nogil=True)
def _template(m, y, x, h, w):
    ctx = 0
    for dy, dx in ((-2, -1), (-2, 0), (-2, 1), (-1, -2), (-1, -1), (-1, 0), (-1, 1), (-1, 2), (0, -2), (0, -1)):
        yy, xx = y + dy, x + dx
        bit = 0
        if yy >= 0 and 0 <= xx < w:
            bit = m[yy, xx]
        ctx = (ctx << 1) | bit
    return ctx


@njit(cache=True, nogil=True)
def _encode_bitmap(m, out):
    h, w = m.shape
    probs = np.full(N_CONTEXTS, PROB_INIT, dtype=np.int64)
    st = np.zeros(5, dtype=np.int64)
    st[1] = 0xFFFFFFFF
    st[3] = 1
    for y in range(h):
        for x in range(w):
            _enc_bit(st, out, probs, _template(m, y, x, h, w), m[y, x])
    for _ in range(5):
        _shift_low(st, out)
    return st[4]


@njit(cache=True, nogil=True)
def _decode_bitmap(data, h, w):
    m = np.zeros((h, w), dtype=np.uint8)
    probs = np.full(N_CONTEXTS, PROB_INIT, dtype=np.int64)
    st = np.zeros(3, dtype=np.int64)
    st[0] = 0xFFFFFFFF
    for _ in range(4):
        b = data[st[2]] if st[2] < data.shape[0] else 0
        st[1] = (st[1] << 8) | b
        st[2] += 1
    for y in range(h):
        for x in range(w):
            m[y, x] = _dec_bit(st, data, probs, _template(m, y, x, h, w))
    return m, st[2]


def _context_encode(mask: np.ndarray) -> bytes:
    m = np.ascontiguousarray(mask, dtype=np.uint8)
    # each pixel costs at most ~16 bits; one extra byte per pixel is ample
    out = np.zeros(m.size * 2 + 16, dtype=np.uint8)
    n = _encode_bitmap(m, out)
    return out[1:n].tobytes()


def _context_decode(data: bytes, height: int, width: int) -> np.ndarray:
    buf = np.frombuffer(data, dtype=np.uint8)
    m, used = _decode_bitmap(buf, height, width)
    if used > buf.size + 4:
        raise CorruptStreamError("context-coded mask is truncated")
    return m.astype(bool)


def encode_mask(mask: np.ndarray) -> bytes:
    """Smallest of the two representations, prefixed with its tag."""
    mask = np.asarray(mask, dtype=bool)
    rle = rle_encode(mask)
    if not mask.any():
        return bytes([RLE]) + rle
    ctx = _context_encode(mask)
    return bytes([CONTEXT]) + ctx if len(ctx) < len(rle) else bytes([RLE]) + rle


def decode_mask(segment: bytes, height: int, width: int) -> np.ndarray:
    if not segment:
        raise CorruptStreamError("empty mask segment")
    tag, body = segment[0], segment[1:]
    if tag == RLE:
        return rle_decode(body, height, width)
    if tag == CONTEXT:
        return _context_decode(body, height, width)
    raise CorruptStreamError(f"unknown mask coding method {tag}")

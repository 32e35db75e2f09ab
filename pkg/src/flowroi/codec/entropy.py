"""
Embedded bitplane coding with an adaptive binary range coder.

Coefficient magnitudes are sent plane by plane from the most significant
plane down. Within a plane the subbands are visited coarse to fine, each
subband in 16x16 blocks. A block that holds no significant coefficient
yet costs one flag per plane; inside active blocks every coefficient gets
a significance bit (context: number of significant left/up/right
neighbours), a sign bit on becoming significant, or a refinement bit once
significant.

The range coder follows the LZMA design (32-bit range, byte-wise
renormalization with carry propagation) with 15-bit probabilities and
adaptation shift 5, so that near-certain symbols cost ~0.001 bit. All state is
integer, so streams are identical on every platform.

Coding stops as soon as the output could exceed the byte budget; the
number of coded symbols is transmitted so the decoder stops at the same
place, and a fixed 16-bit terminal marker detects desynchronization.
"""

from __future__ import annotations

import numpy as np
from numba import njit

PROB_BITS = 15
PROB_ONE = 1 << PROB_BITS
PROB_INIT = PROB_ONE // 2
ADAPT_SHIFT = 5
TOP = 1 << 24

BLOCK = 16
# per band: block flag, 4 significance contexts, sign, refinement
CTX_PER_BAND = 7
CTX_BLOCK, CTX_SIG, CTX_SIGN, CTX_REF = 0, 1, 5, 6

MARKER = 0xA5C3
MARKER_BITS = 16
# worst-case growth of the coded size before the next stop check:
# flush (5) + marker (2) + one significance+sign step (2 x 2) + slack (1)
RESERVE = 12
UNLIMITED = np.iinfo(np.int64).max // 4


@njit(cache=True, nogil=True)
def _shift_low(st, out):
    # st: low, range, cache, cache_size, pos
    low = st[0]
    if low < 0xFF000000 or low >= 0x100000000:
        carry = low >> 32
        temp = st[2]
        while True:
            out[st[4]] = (temp + carry) & 0xFF
            st[4] += 1
            temp = 0xFF
            st[3] -= 1
            if st[3] == 0:
                break
        st[2] = (low >> 24) & 0xFF
    st[3] += 1
    st[0] = (low & 0x00FFFFFF) << 8


@njit(cache=True, nogil=True)
def _enc_bit(st, out, probs, ctx, bit):
    p = probs[ctx]
    bound = (st[1] >> PROB_BITS) * p
    if bit == 0:
        st[1] = bound
        probs[ctx] = p + ((PROB_ONE - p) >> ADAPT_SHIFT)
    else:
        st[0] += bound
        st[1] -= bound
        probs[ctx] = p - (p >> ADAPT_SHIFT)
    while st[1] < TOP:
        st[1] <<= 8
        _shift_low(st, out)


@njit(cache=True, nogil=True)
def _enc_fixed(st, out, bit):
    bound = (st[1] >> PROB_BITS) * PROB_INIT
    if bit == 0:
        st[1] = bound
    else:
        st[0] += bound
        st[1] -= bound
    while st[1] < TOP:
        st[1] <<= 8
        _shift_low(st, out)


@njit(cache=True, nogil=True)
def _dec_bit(st, data, probs, ctx):
    # st: range, code, pos
    p = probs[ctx]
    bound = (st[0] >> PROB_BITS) * p
    if st[1] < bound:
        st[0] = bound
        probs[ctx] = p + ((PROB_ONE - p) >> ADAPT_SHIFT)
        bit = 0
    else:
        st[1] -= bound
        st[0] -= bound
        probs[ctx] = p - (p >> ADAPT_SHIFT)
        bit = 1
    while st[0] < TOP:
        st[0] <<= 8
        b = data[st[2]] if st[2] < data.shape[0] else 0
        st[1] = ((st[1] << 8) | b) & 0xFFFFFFFF
        st[2] += 1
    return bit


@njit(cache=True, nogil=True)
def _dec_fixed(st, data):
    bound = (st[0] >> PROB_BITS) * PROB_INIT
    if st[1] < bound:
        st[0] = bound
        bit = 0
    else:
        st[1] -= bound
        st[0] -= bound
        bit = 1
    while st[0] < TOP:
        st[0] <<= 8
        b = data[st[2]] if st[2] < data.shape[0] else 0
        st[1] = ((st[1] << 8) | b) & 0xFFFFFFFF
        st[2] += 1
    return bit


@njit(cache=True, nogil=True)
def _neighbour_ctx(sig, base, y, x, w):
    i = base + y * w + x
    n = 0
    if x > 0 and sig[i - 1]:
        n += 1
    if y > 0 and sig[i - w]:
        n += 1
    if x + 1 < w and sig[i + 1]:
        n += 1
    return n


@njit(cache=True, nogil=True)
def _block_max(mags, band_off, band_h, band_w, blk_off, n_blocks):
    out = np.zeros(n_blocks, dtype=np.int64)
    for b in range(band_off.shape[0]):
        h, w, base = band_h[b], band_w[b], band_off[b]
        nbx = (w + BLOCK - 1) // BLOCK
        for y in range(h):
            for x in range(w):
                k = blk_off[b] + (y // BLOCK) * nbx + (x // BLOCK)
                m = mags[base + y * w + x]
                out[k] = max(out[k], m)
    return out


@njit(cache=True, nogil=True)
def encode_planes(mags, negative, band_off, band_h, band_w, blk_off, band_floor, n_planes, budget, out):
    """Code magnitudes plane by plane into ``out``.

    Planes below ``band_floor[b]`` are known to be zero for band ``b`` and
    are skipped. Returns ``(n_bytes, n_symbols)``; ``out[:n_bytes]`` is the
    stream.
    """
    n_bands = band_off.shape[0]
    n_blocks = blk_off[n_bands]
    probs = np.full(n_bands * CTX_PER_BAND, PROB_INIT, dtype=np.int64)
    sig = np.zeros(mags.shape[0], dtype=np.bool_)
    active = np.zeros(n_blocks, dtype=np.bool_)
    bmax = _block_max(mags, band_off, band_h, band_w, blk_off, n_blocks)
    st = np.zeros(5, dtype=np.int64)
    st[1] = 0xFFFFFFFF
    st[3] = 1
    n_sym = 0
    done = False
    for p in range(n_planes - 1, -1, -1):
        if done:
            break
        thresh = np.int64(1) << p
        for b in range(n_bands):
            if done:
                break
            if p < band_floor[b]:
                continue
            h, w, base = band_h[b], band_w[b], band_off[b]
            cb = b * CTX_PER_BAND
            nby = (h + BLOCK - 1) // BLOCK
            nbx = (w + BLOCK - 1) // BLOCK
            for by in range(nby):
                if done:
                    break
                for bx in range(nbx):
                    k = blk_off[b] + by * nbx + bx
                    if not active[k]:
                        if st[4] - 1 + st[3] + RESERVE > budget:
                            done = True
                            break
                        flag = 1 if bmax[k] >= thresh else 0
                        _enc_bit(st, out, probs, cb + CTX_BLOCK, flag)
                        n_sym += 1
                        if flag == 0:
                            continue
                        active[k] = True
                    y1 = min(by * BLOCK + BLOCK, h)
                    x1 = min(bx * BLOCK + BLOCK, w)
                    for y in range(by * BLOCK, y1):
                        if done:
                            break
                        for x in range(bx * BLOCK, x1):
                            if st[4] - 1 + st[3] + RESERVE > budget:
                                done = True
                                break
                            i = base + y * w + x
                            bit = (mags[i] >> p) & 1
                            if sig[i]:
                                _enc_bit(st, out, probs, cb + CTX_REF, bit)
                                n_sym += 1
                            else:
                                ctx = cb + CTX_SIG + _neighbour_ctx(sig, base, y, x, w)
                                _enc_bit(st, out, probs, ctx, bit)
                                n_sym += 1
                                if bit:
                                    _enc_bit(st, out, probs, cb + CTX_SIGN, 1 if negative[i] else 0)
                                    n_sym += 1
                                    sig[i] = True
                    if done:
                        break
    for j in range(MARKER_BITS - 1, -1, -1):
        _enc_fixed(st, out, (MARKER >> j) & 1)
    for _ in range(5):
        _shift_low(st, out)
    return st[4], n_sym


@njit(cache=True, nogil=True)
def decode_planes(data, n_coeffs, band_off, band_h, band_w, blk_off, band_floor, n_planes, n_symbols):
    """Inverse of :func:`encode_planes`.

    Returns ``(mags, negative, known_plane, marker_ok)``. ``mags`` holds the
    decoded magnitude bits; ``known_plane[i]`` is the lowest plane decoded
    for coefficient ``i`` (only meaningful where ``mags[i] > 0``).
    """
    n_bands = band_off.shape[0]
    n_blocks = blk_off[n_bands]
    probs = np.full(n_bands * CTX_PER_BAND, PROB_INIT, dtype=np.int64)
    sig = np.zeros(n_coeffs, dtype=np.bool_)
    mags = np.zeros(n_coeffs, dtype=np.int64)
    negative = np.zeros(n_coeffs, dtype=np.bool_)
    known = np.full(n_coeffs, n_planes, dtype=np.int64)
    active = np.zeros(n_blocks, dtype=np.bool_)
    st = np.zeros(3, dtype=np.int64)
    st[0] = 0xFFFFFFFF
    for _ in range(4):
        b = data[st[2]] if st[2] < data.shape[0] else 0
        st[1] = (st[1] << 8) | b
        st[2] += 1
    n_sym = 0
    done = n_symbols == 0
    for p in range(n_planes - 1, -1, -1):
        if done:
            break
        for b in range(n_bands):
            if done:
                break
            if p < band_floor[b]:
                continue
            h, w, base = band_h[b], band_w[b], band_off[b]
            cb = b * CTX_PER_BAND
            nby = (h + BLOCK - 1) // BLOCK
            nbx = (w + BLOCK - 1) // BLOCK
            for by in range(nby):
                if done:
                    break
                for bx in range(nbx):
                    k = blk_off[b] + by * nbx + bx
                    if not active[k]:
                        if n_sym >= n_symbols:
                            done = True
                            break
                        flag = _dec_bit(st, data, probs, cb + CTX_BLOCK)
                        n_sym += 1
                        if flag == 0:
                            continue
                        active[k] = True
                    y1 = min(by * BLOCK + BLOCK, h)
                    x1 = min(bx * BLOCK + BLOCK, w)
                    for y in range(by * BLOCK, y1):
                        if done:
                            break
                        for x in range(bx * BLOCK, x1):
                            if n_sym >= n_symbols:
                                done = True
                                break
                            i = base + y * w + x
                            if sig[i]:
                                bit = _dec_bit(st, data, probs, cb + CTX_REF)
                                n_sym += 1
                            else:
                                ctx = cb + CTX_SIG + _neighbour_ctx(sig, base, y, x, w)
                                bit = _dec_bit(st, data, probs, ctx)
                                n_sym += 1
                                if bit:
                                    negative[i] = _dec_bit(st, data, probs, cb + CTX_SIGN) == 1
                                    n_sym += 1
                                    sig[i] = True
                            if bit:
                                mags[i] |= np.int64(1) << p
                            known[i] = p
                    if done:
                        break
    marker = 0
    for _ in range(MARKER_BITS):
        marker = (marker << 1) | _dec_fixed(st, data)
    marker_ok = marker == MARKER and n_sym == n_symbols and st[2] <= data.shape[0] + 4
    return mags, negative, known, marker_ok


def _floor_array(band_floor, n_bands):
    if band_floor is None:
        return np.zeros(n_bands, dtype=np.int64)
    return np.asarray(band_floor, dtype=np.int64)


def band_tables(shapes):
    """Offsets of bands and of their block grids for a list of ``(h, w)`` shapes."""
    band_h = np.array([s[0] for s in shapes], dtype=np.int64)
    band_w = np.array([s[1] for s in shapes], dtype=np.int64)
    sizes = band_h * band_w
    band_off = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
    nblk = ((band_h + BLOCK - 1) // BLOCK) * ((band_w + BLOCK - 1) // BLOCK)
    blk_off = np.concatenate([[0], np.cumsum(nblk)]).astype(np.int64)
    return band_off, band_h, band_w, blk_off


def encode_coefficients(coeffs: np.ndarray, shapes, budget: int | None, band_floor=None):
    """Entropy-code a flat signed coefficient vector.

    Parameters
    ----------
    coeffs : ndarray of int64
        All subbands concatenated in scan order.
    shapes : list of (h, w)
        Subband shapes in the same order.
    budget : int or None
        Maximum number of output bytes, ``None`` for lossless.
    band_floor : sequence of int, optional
        Per band, the number of low planes known to be zero.

    Returns
    -------
    data : bytes
    n_symbols : int
    n_planes : int
    """
    coeffs = np.ascontiguousarray(coeffs, dtype=np.int64)
    mags = np.abs(coeffs)
    negative = coeffs < 0
    top = int(mags.max()) if mags.size else 0
    n_planes = top.bit_length()
    band_off, band_h, band_w, blk_off = band_tables(shapes)
    floor = _floor_array(band_floor, len(shapes))
    if budget is None:
        n_syms_max = mags.size * (n_planes + 1) + int(blk_off[-1]) * n_planes
        capacity = n_syms_max * 7 // 8 + 64
        limit = UNLIMITED
    else:
        capacity = budget + 64
        limit = budget
    out = np.zeros(capacity, dtype=np.uint8)
    n_bytes, n_sym = encode_planes(mags, negative, band_off, band_h, band_w, blk_off, floor, n_planes, limit, out)
    # the first byte of this coder's output is always zero
    return out[1:n_bytes].tobytes(), int(n_sym), n_planes


def decode_coefficients(data: bytes, shapes, n_planes: int, n_symbols: int, band_floor=None):
    """Inverse of :func:`encode_coefficients` with midpoint reconstruction.

    Returns the signed coefficients and a flag telling whether the terminal
    marker was found intact.
    """
    band_off, band_h, band_w, blk_off = band_tables(shapes)
    n = int((band_h * band_w).sum())
    buf = np.frombuffer(data, dtype=np.uint8)
    floor = _floor_array(band_floor, len(shapes))
    mags, negative, known, ok = decode_planes(buf, n, band_off, band_h, band_w, blk_off, floor, n_planes, n_symbols)
    # centre of the remaining uncertainty interval [m, m + 2^q)
    half = np.where(known >= 1, np.left_shift(1, np.maximum(known - 1, 0)), 0)
    recon = np.where(mags > 0, mags + half, 0)
    return np.where(negative, -recon, recon), bool(ok)

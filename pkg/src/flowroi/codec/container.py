"""
The ``.froi`` container.

All integers little-endian::

    offset  size  field
    0       4     magic  b"FROI"
    4       2     version (u16, currently 1)
    6       4     width (u32)
    10      4     height (u32)
    14      1     depth (u8, 8 or 16)
    15      1     dwt levels (u8)
    16      1     scaling factor (u8)
    17      4     compression rate x 100 (u32, 0 = lossless)
    21      4     mask segment length (u32)
    25      4     payload length (u32)
    29      ...   mask segment, then payload

Mask segment: one method byte, then the mask body. Method 0 is row-major
run lengths as unsigned LEB128 varints, alternating background/RoI and
starting with a (possibly empty) background run. Method 1 is the bitmap
coded with the adaptive range coder under a 10-pixel causal context (see
:mod:`flowroi.codec.maskcode`). The encoder writes whichever is shorter.

Payload: number of coded symbols (u32), number of bitplanes (u8), then the
range-coder bytes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from ..errors import CorruptStreamError

MAGIC = b"FROI"
VERSION = 1
HEADER = struct.Struct("<4sHIIBBBIII")
HEADER_SIZE = HEADER.size
PAYLOAD_PREFIX = struct.Struct("<IB")


@dataclass(frozen=True)
class RoiBitstream:
    """Parsed container."""

    width: int
    height: int
    depth: int
    dwt_levels: int
    scaling_factor: int
    compression_rate: float
    mask_segment: bytes
    payload: bytes
    version: int = VERSION

    def to_bytes(self) -> bytes:
        rate = 0 if self.compression_rate is None else int(round(self.compression_rate * 100))
        head = HEADER.pack(
            MAGIC,
            self.version,
            self.width,
            self.height,
            self.depth,
            self.dwt_levels,
            self.scaling_factor,
            rate,
            len(self.mask_segment),
            len(self.payload),
        )
        return head + self.mask_segment + self.payload

    def __len__(self) -> int:
        return HEADER_SIZE + len(self.mask_segment) + len(self.payload)

    @property
    def lossless(self) -> bool:
        return self.compression_rate is None

    @classmethod
    def from_bytes(cls, data: bytes) -> RoiBitstream:
        if len(data) < HEADER_SIZE:
            raise CorruptStreamError(f"truncated file: {len(data)} bytes is shorter than the header")
        magic, version, w, h, depth, levels, scaling, rate, mlen, plen = HEADER.unpack_from(data)
        if magic != MAGIC:
            raise CorruptStreamError("bad magic, not a .froi stream")
        if version != VERSION:
            raise CorruptStreamError(f"unsupported version {version}")
        if depth not in (8, 16) or w == 0 or h == 0 or levels == 0:
            raise CorruptStreamError("inconsistent header")
        end = HEADER_SIZE + mlen + plen
        if len(data) < end:
            raise CorruptStreamError(f"truncated file: expected {end} bytes, got {len(data)}")
        if len(data) > end:
            raise CorruptStreamError(f"{len(data) - end} trailing bytes after payload")
        if plen < PAYLOAD_PREFIX.size:
            raise CorruptStreamError("payload too short")
        return cls(
            width=w,
            height=h,
            depth=depth,
            dwt_levels=levels,
            scaling_factor=scaling,
            compression_rate=None if rate == 0 else rate / 100.0,
            mask_segment=bytes(data[HEADER_SIZE : HEADER_SIZE + mlen]),
            payload=bytes(data[HEADER_SIZE + mlen : end]),
            version=version,
        )

"""
End-to-end frame pipeline: RoI extraction followed by RoI coding.

Stages run one after another over the whole sequence, each stage spread
over a thread pool (the heavy kernels release the GIL). Every per-frame
operation is pure, so the bytes produced never depend on ``workers``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .codec import CodecParams, decode, encode
from .config import PipelineConfig
from .errors import FrameError
from .roi import extract_roi, parallel_map
from .sequence import Sequence
from .timing import StageTimer, stage

__all__ = ["CompressResult", "encode_frames", "decode_streams", "compress_sequence", "empty_masks"]


@dataclass
class CompressResult:
    streams: list
    masks: list
    timer: StageTimer = field(default_factory=StageTimer)
    elapsed: float = 0.0

    @property
    def sizes(self) -> list:
        return [len(s) for s in self.streams]


def encode_frames(frames, masks, params: CodecParams, workers: int = 1, timer: StageTimer | None = None) -> list:
    """Encode ``frames[i]`` with ``masks[i]`` (``None`` entries mean uniform coding)."""

    def one(i, frame, mask):
        try:
            with stage(timer, "encode"):
                return encode(frame, mask, params)
        except Exception as exc:
            raise FrameError("encode", i, exc) from exc

    if masks is None:
        masks = [None] * len(frames)
    return parallel_map(one, list(zip(range(len(frames)), frames, masks)), workers)


def decode_streams(streams, workers: int = 1) -> list:
    """Decode bitstreams (objects or raw bytes) into ``(Frame, mask)`` pairs."""

    def one(i, s):
        try:
            return decode(s)
        except Exception as exc:
            raise FrameError("decode", i, exc) from exc

    return parallel_map(one, list(enumerate(streams)), workers)


def compress_sequence(
    sequence: Sequence,
    config: PipelineConfig,
    masks=None,
    workers: int | None = None,
    timer: StageTimer | None = None,
) -> CompressResult:
    """Extract RoI masks (unless given) and encode every frame."""
    workers = config.resolved_workers() if workers is None else workers
    timer = timer if timer is not None else StageTimer()
    t0 = time.perf_counter()
    if masks is None:
        masks = extract_roi(sequence, config, workers, timer)
    masks = [np.asarray(m, dtype=bool) for m in masks]
    streams = encode_frames(list(sequence), masks, config.codec, workers, timer)
    return CompressResult(streams, masks, timer, time.perf_counter() - t0)


def empty_masks(frames) -> list:
    return [np.zeros(f.shape, dtype=bool) for f in frames]

"""Motion-salient RoI extraction and RoI-priority wavelet coding for time-lapse microscopy."""

from .codec import CodecParams, RoiBitstream, decode, encode, encode_uniform
from .config import PipelineConfig
from .errors import (
    CodecError,
    CorruptStreamError,
    FlowRoiError,
    FrameError,
    InfeasibleRateError,
    SequenceError,
)
from .flow import FlowField, FlowParams, compute_flow
from .metrics import coverage, psnr, quality_report, rate_curve, throughput
from .pipeline import compress_sequence, decode_streams, encode_frames
from .preprocess import DenoiseParams, Shift, denoise, register
from .roi import RoiParams, extract_roi
from .sequence import (
    Frame,
    GroundTruth,
    Sequence,
    SyntheticSpec,
    generate_synthetic,
    load_sequence,
)

__version__ = "0.1.0"

__all__ = [
    "CodecParams",
    "RoiBitstream",
    "encode",
    "encode_uniform",
    "decode",
    "PipelineConfig",
    "FlowRoiError",
    "SequenceError",
    "CodecError",
    "CorruptStreamError",
    "InfeasibleRateError",
    "FrameError",
    "FlowField",
    "FlowParams",
    "compute_flow",
    "coverage",
    "psnr",
    "quality_report",
    "rate_curve",
    "throughput",
    "compress_sequence",
    "encode_frames",
    "decode_streams",
    "DenoiseParams",
    "Shift",
    "denoise",
    "register",
    "RoiParams",
    "extract_roi",
    "Frame",
    "GroundTruth",
    "Sequence",
    "SyntheticSpec",
    "generate_synthetic",
    "load_sequence",
]

"""
Quality, coverage, rate and throughput measurements.

PSNR is reported three ways: over the whole frame, inside the RoI region
and outside it. When generator ground truth exists, the RoI region is the
true cell area, so codec quality and mask quality are measured
separately; otherwise the pipeline's own mask stands in.
"""

from __future__ import annotations

import csv
import json
import math
import os
import platform
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .codec import CodecParams, decode
from .config import PipelineConfig
from .errors import SequenceError
from .pipeline import compress_sequence, encode_frames
from .roi import extract_roi, parallel_map
from .sequence import Frame, GroundTruth, Sequence
from .timing import StageTimer

__all__ = [
    "REPORT_SCHEMA_VERSION",
    "mse",
    "psnr",
    "FrameQuality",
    "QualityReport",
    "CoverageReport",
    "RateRow",
    "quality_report",
    "coverage",
    "rate_curve",
    "throughput",
    "host_cpu",
    "to_json",
    "write_json",
    "write_rate_csv",
]

REPORT_SCHEMA_VERSION = 1
STRONG_CONTRAST_FACTOR = 2.0


def _pixels(img) -> np.ndarray:
    return img.pixels if isinstance(img, Frame) else np.asarray(img)


def _peak(reference, max_value) -> float:
    if max_value is not None:
        return float(max_value)
    if isinstance(reference, Frame):
        return float(reference.max_value)
    arr = np.asarray(reference)
    if arr.dtype == np.uint8:
        return 255.0
    if arr.dtype == np.uint16:
        return 65535.0
    raise ValueError("max_value is required for non-integer arrays")


def mse(reference, test, region=None) -> float:
    a = _pixels(reference).astype(np.float64)
    b = _pixels(test).astype(np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if region is not None:
        region = np.asarray(region, dtype=bool)
        if region.shape != a.shape:
            raise ValueError(f"region shape {region.shape} does not match {a.shape}")
        if not region.any():
            raise ValueError("PSNR region is empty")
        a, b = a[region], b[region]
    d = a - b
    return float(np.mean(d * d))


def psnr(reference, test, region=None, max_value=None) -> float:
    """``10 log10(MAX^2 / MSE)`` over ``region`` (whole frame if None); ``inf`` when identical."""
    err = mse(reference, test, region)
    if err == 0.0:
        return math.inf
    peak = _peak(reference, max_value)
    return 10.0 * math.log10(peak * peak / err)


def _psnr_or_none(reference, test, region):
    if region is not None and not np.any(region):
        return None
    return psnr(reference, test, region)


@dataclass
class FrameQuality:
    frame: int
    psnr_global: float
    psnr_roi: float | None
    psnr_background: float | None
    achieved_ratio: float | None
    mask_fraction: float
    compressed_bytes: int | None = None


def _aggregate(values):
    vals = [v for v in values if v is not None]
    if not vals:
        return {"mean": None, "min": None}
    return {"mean": float(np.mean(vals)), "min": float(np.min(vals))}


@dataclass
class QualityReport:
    rows: list

    FIELDS = ("psnr_global", "psnr_roi", "psnr_background", "achieved_ratio", "mask_fraction")

    def aggregates(self) -> dict:
        return {f: _aggregate([getattr(r, f) for r in self.rows]) for f in self.FIELDS}

    def mean(self, name: str) -> float | None:
        return self.aggregates()[name]["mean"]

    def to_dict(self) -> dict:
        return {"frames": [asdict(r) for r in self.rows], "aggregate": self.aggregates()}


def quality_report(originals, decoded, regions=None, masks=None, sizes=None, workers: int = 1) -> QualityReport:
    """Per-frame PSNR rows.

    ``regions`` are the RoI evaluation regions (ground-truth cells when
    known); if omitted, ``masks`` are used instead. ``sizes`` are the
    compressed byte counts, from which achieved ratios are derived.
    """
    originals, decoded = list(originals), list(decoded)
    if len(originals) != len(decoded):
        raise SequenceError(f"{len(originals)} reference frames but {len(decoded)} decoded frames")
    n = len(originals)
    regions = regions if regions is not None else masks

    def row(i):
        ref, dec = originals[i], decoded[i]
        region = None if regions is None else np.asarray(regions[i], dtype=bool)
        mask = None if masks is None else np.asarray(masks[i], dtype=bool)
        size = None if sizes is None else int(sizes[i])
        return FrameQuality(
            frame=i,
            psnr_global=psnr(ref, dec),
            psnr_roi=None if region is None else _psnr_or_none(ref, dec, region),
            psnr_background=None if region is None else _psnr_or_none(ref, dec, ~region),
            achieved_ratio=None if not size else ref.raw_bytes / size,
            mask_fraction=0.0 if mask is None else float(mask.mean()),
            compressed_bytes=size,
        )

    return QualityReport(parallel_map(row, [(i,) for i in range(n)], workers))


@dataclass
class CoverageReport:
    cells_total: int
    cells_covered: int
    coverage_rate: float
    strong_total: int
    strong_covered: int
    strong_coverage_rate: float
    mean_iou: float
    missed_cell_log: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["missed_cell_log"] = [{"frame": f, "cell": c, "contrast": k} for f, c, k in self.missed_cell_log]
        return d


def coverage(masks, truth: GroundTruth, strong_factor: float = STRONG_CONTRAST_FACTOR) -> CoverageReport:
    """Count ground-truth cells that share at least one pixel with the mask.

    Cells with contrast above ``strong_factor`` times the noise sigma are
    tallied separately. ``mean_iou`` is the frame-averaged IoU between the
    mask and the union of cell disks.
    """
    masks = list(masks)
    if len(masks) != truth.n_frames:
        raise SequenceError(f"{len(masks)} masks for {truth.n_frames} ground-truth frames")
    strong = truth.contrasts > strong_factor * truth.noise_sigma
    total = covered = s_total = s_covered = 0
    missed = []
    ious = []
    for t, m in enumerate(masks):
        m = np.asarray(m, dtype=bool)
        for cell, (bbox, disk) in enumerate(truth.cell_masks(t)):
            if not disk.any():
                continue
            hit = bool(np.any(m[bbox] & disk))
            total += 1
            covered += hit
            if strong[cell]:
                s_total += 1
                s_covered += hit
            if not hit:
                missed.append((t, cell, float(truth.contrasts[cell])))
        gt = truth.masks[t]
        union = np.count_nonzero(gt | m)
        ious.append(np.count_nonzero(gt & m) / union if union else 1.0)
    return CoverageReport(
        cells_total=total,
        cells_covered=covered,
        coverage_rate=covered / total if total else 1.0,
        strong_total=s_total,
        strong_covered=s_covered,
        strong_coverage_rate=s_covered / s_total if s_total else 1.0,
        mean_iou=float(np.mean(ious)) if ious else 1.0,
        missed_cell_log=missed,
    )


@dataclass
class RateRow:
    rate: float
    method: str
    psnr_global: float
    psnr_roi: float | None
    psnr_background: float | None
    achieved_ratio: float
    mean_bytes: float


def _rate_row(frames, masks, regions, rate, method, params, workers) -> RateRow:
    streams = encode_frames(frames, masks, params, workers)
    decoded = [f for f, _ in parallel_map(lambda s: decode(s), [(s,) for s in streams], workers)]
    rep = quality_report(frames, decoded, regions=regions, masks=masks, sizes=[len(s) for s in streams], workers=workers)
    agg = rep.aggregates()
    return RateRow(
        rate=float(rate),
        method=method,
        psnr_global=agg["psnr_global"]["mean"],
        psnr_roi=agg["psnr_roi"]["mean"],
        psnr_background=agg["psnr_background"]["mean"],
        achieved_ratio=agg["achieved_ratio"]["mean"],
        mean_bytes=float(np.mean([len(s) for s in streams])),
    )


def rate_curve(
    sequence: Sequence,
    config: PipelineConfig,
    rates,
    masks=None,
    truth: GroundTruth | None = None,
    workers: int | None = None,
    methods=("flowroi", "uniform"),
) -> list:
    """Mean per-frame PSNR at each rate, for RoI coding and the empty-mask baseline.

    Masks are extracted once (unless supplied) and reused at every rate.
    The RoI evaluation region is the ground-truth cell area when ``truth``
    is given, the extracted mask otherwise.
    """
    rates = [float(r) for r in rates]
    if any(r <= 1 for r in rates) or rates != sorted(rates):
        raise ValueError("rates must be > 1 and ascending")
    workers = config.resolved_workers() if workers is None else workers
    frames = list(sequence)
    if masks is None:
        masks = extract_roi(sequence, config, workers)
    regions = list(truth.masks) if truth is not None else masks
    empty = [np.zeros(f.shape, dtype=bool) for f in frames]
    rows = []
    for rate in rates:
        params = CodecParams(
            scaling_factor=config.codec.scaling_factor,
            compression_rate=rate,
            dwt_levels=config.codec.dwt_levels,
        )
        for method in methods:
            m = masks if method == "flowroi" else empty
            rows.append(_rate_row(frames, m, regions, rate, method, params, workers))
    return rows


def host_cpu() -> str:
    try:
        with open("/proc/cpuinfo") as fh:
            for line in fh:
                if line.startswith("model name"):
                    return line.split(":", 1)[1].strip()
    except OSError:
        pass
    return platform.processor() or platform.machine()


def throughput(sequence: Sequence, config: PipelineConfig, worker_counts=None) -> dict:
    """Frames per second of the extract + encode path.

    A two-frame warm-up run (JIT compilation, caches) is excluded. The
    per-stage breakdown comes from the single-worker run.
    """
    if len(sequence) < 10:
        raise SequenceError("throughput needs at least 10 frames")
    if worker_counts is None:
        worker_counts = sorted({1, os.cpu_count() or 1})
    compress_sequence(Sequence(tuple(sequence)[:2], sequence.frame_interval), config, workers=1)
    out = {"frames": len(sequence), "host_cpu": host_cpu(), "cpu_count": os.cpu_count(), "runs": []}
    for workers in worker_counts:
        timer = StageTimer()
        t0 = time.perf_counter()
        compress_sequence(sequence, config, workers=workers, timer=timer)
        elapsed = time.perf_counter() - t0
        run = {"workers": workers, "seconds": elapsed, "fps": len(sequence) / elapsed}
        if workers == 1:
            run["stages"] = dict(timer.seconds)
        out["runs"].append(run)
    return out


def _jsonable(obj):
    if isinstance(obj, float) or isinstance(obj, np.floating):
        v = float(obj)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def to_json(report: dict) -> str:
    """Deterministic JSON; infinities become the strings ``"inf"``/``"-inf"``."""
    body = {"schema_version": REPORT_SCHEMA_VERSION, **report}
    return json.dumps(_jsonable(body), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(report: dict, path) -> None:
    with open(path, "w") as fh:
        fh.write(to_json(report))


RATE_COLUMNS = ("rate", "method", "psnr_global", "psnr_roi", "psnr_background", "achieved_ratio", "mean_bytes")


def write_rate_csv(rows, path, extra: dict | None = None, append: bool = False) -> None:
    """Rate-curve rows as CSV; ``extra`` columns (e.g. sweep parameters) come first."""
    extra = extra or {}
    cols = list(extra) + list(RATE_COLUMNS)
    new = not append or not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a" if append else "w", newline="") as fh:
        w = csv.writer(fh)
        if new:
            w.writerow(cols)
        for r in rows:
            d = asdict(r)
            w.writerow([*extra.values(), *(_csv_value(d[c]) for c in RATE_COLUMNS)])


def _csv_value(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(round(v, 6))
    return v

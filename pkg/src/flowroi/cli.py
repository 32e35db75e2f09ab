"""
``flowroi`` command line.

Subcommands: synth, extract-roi, compress, decompress, evaluate, sweep, plot.

Exit codes: 0 success, 1 usage error, 2 data error (bad input, corrupt
stream, infeasible rate, I/O failure), 3 internal error.

Configuration precedence: command-line flags, then ``--config`` file,
then built-in defaults. Reports echo the resolved configuration (minus
``workers``, which never affects output) and a SHA-256 of the inputs.
Unless ``--timing`` is requested, reports contain no wall-clock data and
are byte-identical across runs.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import itertools
import sys
import traceback
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import metrics
from .codec import decode
from .config import PipelineConfig, parse_kv
from .errors import FlowRoiError, FrameError, InfeasibleRateError
from .flow import compute_flow, write_flo
from .pipeline import compress_sequence
from .preprocess import denoise, register
from .roi import (
    extract_roi,
    masks_from_saliency,
    parallel_map,
    sequence_saliency,
    usable_shift,
)
from .sequence import (
    SyntheticSpec,
    generate_synthetic,
    list_frames,
    load_sequence,
    read_pbm,
    read_truth,
    write_dataset,
    write_pbm,
    write_pgm,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

MAX_SWEEP_COMBINATIONS = 10_000
STREAM_SUFFIX = ".froi"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# --------------------------------------------------------------------------
# argument definitions
# --------------------------------------------------------------------------

# (flag, config key, type)
_PIPELINE_FLAGS = [
    ("--denoise", "denoise", "onoff"),
    ("--median-radius", "median_radius", int),
    ("--bilateral-sigma-spatial", "bilateral_sigma_spatial", float),
    ("--bilateral-sigma-range", "bilateral_sigma_range", float),
    ("--bilateral-radius", "bilateral_radius", int),
    ("--max-shift", "max_shift", int),
    ("--flow-levels", "flow_levels", int),
    ("--flow-scale", "flow_scale", float),
    ("--flow-window", "flow_window", int),
    ("--flow-iters", "flow_iters", int),
    ("--poly-n", "poly_n", int),
    ("--poly-sigma", "poly_sigma", float),
    ("--roi-threshold", "roi_threshold", float),
    ("--flow-weight", "flow_weight", float),
    ("--adjacent-factor", "adjacent_factor", int),
    ("--min-area", "min_area", int),
    ("--open-radius", "open_radius", int),
    ("--close-radius", "close_radius", int),
    ("--saliency-gradient", "saliency_gradient", ("image", "flow")),
    ("--saliency-normalization", "saliency_normalization", ("frame", "sequence")),
    ("--scaling-factor", "scaling_factor", int),
    ("--compression-rate", "compression_rate", float),
    ("--dwt-levels", "dwt_levels", int),
]

_SWEEP_KEYS = ("denoise", "roi_threshold", "adjacent_factor", "scaling_factor", "compression_rate")


def _onoff(text: str) -> bool:
    t = text.lower()
    if t in ("on", "true", "1", "yes"):
        return True
    if t in ("off", "false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got {text!r}")


def _add_global(p, suppress: bool):
    default = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", metavar="FILE", default=default, help="flat key=value configuration file")
    p.add_argument("--workers", type=int, default=default, help="worker threads (0 = one per CPU)")
    p.add_argument("--seed", type=int, default=default, help="random seed")
    p.add_argument("--report-out", metavar="PATH", default=default, help="write the JSON report here")


def _add_pipeline_flags(p, lossless: bool = True):
    g = p.add_argument_group("pipeline parameters")
    for flag, key, typ in _PIPELINE_FLAGS:
        if typ == "onoff":
            g.add_argument(flag, dest=key, type=_onoff, metavar="on|off")
        elif isinstance(typ, tuple):
            g.add_argument(flag, dest=key, choices=typ)
        else:
            g.add_argument(flag, dest=key, type=typ)
    if lossless:
        g.add_argument("--lossless", dest="lossless", action="store_true", default=None)
    p.add_argument("--format", default="pgm", choices=("pgm", "png", "tiff-gray"), help="input frame format")


def _range(text: str) -> tuple:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected LO,HI, got {text!r}")
    return tuple(float(x) for x in parts)


def _list_of(typ):
    def parse(text):
        try:
            return [typ(x) for x in text.split(",") if x.strip()]
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None

    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="flowroi", description="Motion-salient RoI compression for time-lapse microscopy.")
    _add_global(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic benchmark dataset")
    _add_global(p, suppress=True)
    p.add_argument("out", help="output dataset directory")
    p.add_argument("--spec", metavar="FILE", help="generator spec (e.g. a previous manifest.txt)")
    p.add_argument("--cells", dest="n_cells", type=int)
    p.add_argument("--frames", dest="n_frames", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--depth", type=int, choices=(8, 16))
    p.add_argument("--noise-sigma", dest="noise_sigma", type=float)
    p.add_argument("--cell-radius", dest="cell_radius_range", type=_range, metavar="LO,HI")
    p.add_argument("--contrast", dest="contrast_range", type=_range, metavar="LO,HI")
    p.add_argument("--speed", dest="speed_range", type=_range, metavar="LO,HI")
    p.add_argument("--low-contrast-fraction", dest="low_contrast_fraction", type=float)
    p.add_argument("--texture-amplitude", dest="texture_amplitude", type=float)
    p.add_argument("--texture-scale", dest="texture_scale", type=float)
    p.add_argument("--drift-max", dest="drift_max", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract-roi", help="write RoI masks (PBM) for a frame sequence")
    _add_global(p, suppress=True)
    p.add_argument("input", help="dataset directory or directory of frames")
    p.add_argument("out", help="output directory for masks")
    p.add_argument("--flow-out", metavar="DIR", help="also dump FLO1 flow fields here")
    _add_pipeline_flags(p, lossless=False)
    p.set_defaults(func=cmd_extract_roi)

    p = sub.add_parser("compress", help="extract RoI masks and encode every frame")
    _add_global(p, suppress=True)
    p.add_argument("input", help="dataset directory or directory of frames")
    p.add_argument("out", help="output directory for .froi files")
    p.add_argument("--masks", metavar="DIR", help="use these PBM masks instead of extracting them")
    p.add_argument("--timing", action="store_true", help="add wall-clock throughput to the report")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("decompress", help="decode .froi files into PGM frames and PBM masks")
    _add_global(p, suppress=True)
    p.add_argument("input", help="directory of .froi files")
    p.add_argument("out", help="output directory")
    p.set_defaults(func=cmd_decompress)

    p = sub.add_parser("evaluate", help="PSNR and coverage of decoded frames")
    _add_global(p, suppress=True)
    p.add_argument("raw", help="original frames (dataset directory or frame directory)")
    p.add_argument("decoded", help="decompress output directory (or a frame directory)")
    p.add_argument("--truth", metavar="DIR", help="dataset directory holding truth/ and trajectories.csv")
    p.add_argument("--streams", metavar="DIR", help=".froi directory, for achieved compression ratios")
    p.add_argument("--format", default="pgm", choices=("pgm", "png", "tiff-gray"))
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="rate-curve rows over a grid of the five main hyperparameters")
    _add_global(p, suppress=True)
    p.add_argument("input", help="dataset directory or directory of frames")
    p.add_argument("out", help="output CSV (appended to when resuming)")
    p.add_argument("--denoise", dest="grid_denoise", type=_list_of(_onoff), metavar="LIST")
    p.add_argument("--roi-threshold", dest="grid_roi_threshold", type=_list_of(float), metavar="LIST")
    p.add_argument("--adjacent-factor", dest="grid_adjacent_factor", type=_list_of(int), metavar="LIST")
    p.add_argument("--scaling-factor", dest="grid_scaling_factor", type=_list_of(int), metavar="LIST")
    p.add_argument("--compression-rate", dest="grid_compression_rate", type=_list_of(float), metavar="LIST")
    p.add_argument("--log", metavar="FILE", help="completed-combination log (default: OUT.log)")
    p.add_argument("--format", default="pgm", choices=("pgm", "png", "tiff-gray"))
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="PSNR-vs-rate SVG line chart from a rate CSV")
    _add_global(p, suppress=True)
    p.add_argument("csv", help="CSV written by sweep")
    p.add_argument("out", help="output SVG path")
    p.add_argument("--metric", default="psnr_roi", choices=("psnr_global", "psnr_roi", "psnr_background"))
    p.set_defaults(func=cmd_plot)
    return parser


# --------------------------------------------------------------------------
# shared helpers
# --------------------------------------------------------------------------


def resolve_config(args) -> PipelineConfig:
    """Defaults, overridden by the config file, overridden by flags."""
    flat = {}
    if getattr(args, "config", None):
        try:
            flat.update(parse_kv(Path(args.config).read_text()))
        except (KeyError, ValueError) as exc:
            raise UsageError(f"{args.config}: {exc}") from None
    flags = {}
    for _, key, _ in _PIPELINE_FLAGS:
        value = getattr(args, key, None)
        if value is not None:
            flags[key] = value
    if getattr(args, "lossless", None):
        flags["lossless"] = True
    if flags.get("lossless") and "compression_rate" in flags:
        raise UsageError("--compression-rate and --lossless are mutually exclusive")
    flat.update(flags)
    if getattr(args, "workers", None) is not None:
        flat["workers"] = args.workers
    if getattr(args, "seed", None) is not None:
        flat["seed"] = args.seed
    try:
        return PipelineConfig().replace(**flat)
    except (KeyError, ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from None


def _dataset_paths(path) -> tuple[Path, Path | None]:
    """``(frames_dir, dataset_dir_with_truth_or_None)`` for a dataset or frame directory."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such directory: {path}")
    if (path / "frames").is_dir():
        truth = path if (path / "truth").is_dir() else None
        return path / "frames", truth
    return path, None


def _load_input(path, fmt="pgm"):
    frames_dir, truth_dir = _dataset_paths(path)
    seq = load_sequence(frames_dir, fmt)
    truth = read_truth(truth_dir) if truth_dir is not None else None
    if truth is not None and truth.n_frames != len(seq):
        raise FlowRoiError(f"{truth_dir}: {truth.n_frames} truth masks for {len(seq)} frames")
    return seq, truth, list_frames(frames_dir, fmt)


def hash_files(paths) -> str:
    h = hashlib.sha256()
    for p in paths:
        p = Path(p)
        h.update(p.name.encode())
        h.update(b"\0")
        h.update(p.read_bytes())
    return h.hexdigest()


def _report_config(config: PipelineConfig) -> dict:
    flat = config.as_flat()
    flat.pop("workers")
    return {"values": flat, "digest": config.digest()}


def _name_width(n: int) -> int:
    return max(4, len(str(n - 1)))


def _emit_report(args, report: dict):
    text = metrics.to_json(report)
    if getattr(args, "report_out", None):
        Path(args.report_out).write_text(text)
    else:
        sys.stdout.write(text)


def mask_stats(masks) -> dict:
    fractions, components = [], []
    for m in masks:
        fractions.append(float(np.mean(m)))
        components.append(int(ndimage.label(m, structure=np.ones((3, 3)))[1]))
    return {
        "pixel_fraction": fractions,
        "components": components,
        "mean_pixel_fraction": float(np.mean(fractions)) if fractions else 0.0,
    }


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_synth(args) -> int:
    base = SyntheticSpec()
    if args.spec:
        base = SyntheticSpec.from_kv(Path(args.spec).read_text())
    overrides = {}
    for name in (
        "n_cells", "n_frames", "width", "height", "depth", "noise_sigma", "cell_radius_range",
        "contrast_range", "speed_range", "low_contrast_fraction", "texture_amplitude",
        "texture_scale", "drift_max",
    ):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if args.seed is not None:
        overrides["seed"] = args.seed
    spec = SyntheticSpec(**{**base.as_dict(), **overrides})
    seq, truth = generate_synthetic(spec)
    write_dataset(seq, truth, args.out, spec)
    report = {
        "command": "synth",
        "spec": spec.as_dict(),
        "frames": len(seq),
        "cells": truth.n_cells,
        "mean_truth_fraction": float(truth.masks.mean()),
        "output_hash": hash_files(list_frames(Path(args.out) / "frames")),
    }
    if args.report_out:
        Path(args.report_out).write_text(metrics.to_json(report))
    return EXIT_OK


def _dump_flows(seq, config, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    width = _name_width(len(seq))
    clean = [denoise(f, config.denoise) for f in seq]
    for t in range(1, len(clean)):
        prev_aligned, _ = register(clean[t], clean[t - 1], usable_shift(config.max_shift, clean[t].shape))
        write_flo(compute_flow(clean[t], prev_aligned, config.flow), out_dir / f"{t:0{width}d}.flo")


def cmd_extract_roi(args) -> int:
    config = resolve_config(args)
    seq, truth, files = _load_input(args.input, args.format)
    masks = extract_roi(seq, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    width = _name_width(len(seq))
    for t, m in enumerate(masks):
        write_pbm(m, out / f"{t:0{width}d}.pbm")
    if args.flow_out:
        _dump_flows(seq, config, args.flow_out)
    report = {
        "command": "extract-roi",
        "config": _report_config(config),
        "input_hash": hash_files(files),
        "masks": mask_stats(masks),
    }
    if truth is not None:
        report["coverage"] = metrics.coverage(masks, truth).to_dict()
    _emit_report(args, report)
    return EXIT_OK


def _read_masks(mask_dir, n):
    files = sorted(Path(mask_dir).glob("*.pbm"))
    if len(files) != n:
        raise FlowRoiError(f"{mask_dir}: {len(files)} masks for {n} frames")
    return [read_pbm(p) for p in files]


def cmd_compress(args) -> int:
    config = resolve_config(args)
    seq, truth, files = _load_input(args.input, args.format)
    if len(seq) < 2:
        raise FlowRoiError("compress needs at least 2 frames")
    masks = _read_masks(args.masks, len(seq)) if args.masks else None
    result = compress_sequence(seq, config, masks=masks)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    width = _name_width(len(seq))
    for t, s in enumerate(result.streams):
        (out / f"{t:0{width}d}{STREAM_SUFFIX}").write_bytes(s.to_bytes())
    budgets = [None if config.codec.lossless else int(f.raw_bytes // config.codec.compression_rate) for f in seq]
    report = {
        "command": "compress",
        "config": _report_config(config),
        "input_hash": hash_files(files),
        "masks": mask_stats(result.masks),
        "frames": [
            {
                "frame": t,
                "bytes": len(s),
                "budget": budgets[t],
                "achieved_ratio": seq[t].raw_bytes / len(s),
            }
            for t, s in enumerate(result.streams)
        ],
        "mean_achieved_ratio": float(np.mean([seq[t].raw_bytes / n for t, n in enumerate(result.sizes)])),
    }
    if truth is not None:
        report["coverage"] = metrics.coverage(result.masks, truth).to_dict()
    if args.timing:
        report["timing"] = {
            "seconds": result.elapsed,
            "fps": len(seq) / result.elapsed if result.elapsed > 0 else None,
            "workers": config.resolved_workers(),
            "stages": dict(result.timer.seconds),
            "host_cpu": metrics.host_cpu(),
        }
    _emit_report(args, report)
    return EXIT_OK


def cmd_decompress(args) -> int:
    config = resolve_config(args)
    src = Path(args.input)
    if not src.is_dir():
        raise FileNotFoundError(f"no such directory: {src}")
    files = sorted(src.glob(f"*{STREAM_SUFFIX}"))
    if not files:
        raise FlowRoiError(f"no {STREAM_SUFFIX} files in {src}")
    out = Path(args.out)
    (out / "frames").mkdir(parents=True, exist_ok=True)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    failures = []

    def one(path):
        try:
            frame, mask = decode(path.read_bytes())
        except FlowRoiError as exc:
            return path, None, None, exc
        return path, frame, mask, None

    results = parallel_map(one, [(p,) for p in files], config.resolved_workers())
    for path, frame, mask, err in results:
        if err is not None:
            failures.append({"file": path.name, "error": str(err)})
            print(f"flowroi: {path}: {err}", file=sys.stderr)
            continue
        write_pgm(frame, out / "frames" / f"{path.stem}.pgm")
        write_pbm(mask, out / "masks" / f"{path.stem}.pbm")
    report = {
        "command": "decompress",
        "input_hash": hash_files(files),
        "decoded": len(files) - len(failures),
        "failed": failures,
    }
    if args.report_out:
        Path(args.report_out).write_text(metrics.to_json(report))
    return EXIT_DATA if failures else EXIT_OK


def cmd_evaluate(args) -> int:
    raw_seq, truth, raw_files = _load_input(args.raw, args.format)
    if args.truth:
        truth = read_truth(args.truth)
    dec_path = Path(args.decoded)
    dec_frames_dir = dec_path / "frames" if (dec_path / "frames").is_dir() else dec_path
    dec_seq = load_sequence(dec_frames_dir, "pgm")
    if len(dec_seq) != len(raw_seq):
        raise FlowRoiError(f"{len(raw_seq)} original frames but {len(dec_seq)} decoded frames")
    masks = _read_masks(dec_path / "masks", len(raw_seq)) if (dec_path / "masks").is_dir() else None
    sizes = None
    stream_files = []
    if args.streams:
        stream_files = sorted(Path(args.streams).glob(f"*{STREAM_SUFFIX}"))
        if len(stream_files) != len(raw_seq):
            raise FlowRoiError(f"{args.streams}: {len(stream_files)} streams for {len(raw_seq)} frames")
        sizes = [p.stat().st_size for p in stream_files]
    regions = list(truth.masks) if truth is not None else masks
    config = resolve_config(args)
    quality = metrics.quality_report(
        raw_seq, dec_seq, regions=regions, masks=masks, sizes=sizes, workers=config.resolved_workers()
    )
    report = {
        "command": "evaluate",
        "input_hash": hash_files(raw_files + list_frames(dec_frames_dir) + stream_files),
        "roi_region": "ground_truth" if truth is not None else ("pipeline_mask" if masks is not None else None),
        "quality": quality.to_dict(),
    }
    if truth is not None and masks is not None:
        report["coverage"] = metrics.coverage(masks, truth).to_dict()
    _emit_report(args, report)
    return EXIT_OK


def _read_log(path: Path, input_hash: str) -> dict:
    done = {}
    if not path.exists():
        return done
    lines = path.read_text().splitlines()
    if lines and lines[0].startswith("# input "):
        if lines[0].split()[2] != input_hash:
            raise FlowRoiError(f"{path}: log belongs to a different input; remove it or pick another --log")
        lines = lines[1:]
    for line in lines:
        parts = line.split("\t")
        if len(parts) >= 2:
            done[parts[0]] = parts[1]
    return done


def _prune_csv(path: Path, keep: set):
    """Drop rows of combinations that never reached the log (interrupted run)."""
    if not path.exists():
        return
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return
    header, body = rows[0], rows[1:]
    col = header.index("config_hash")
    kept = [r for r in body if r[col] in keep]
    if len(kept) != len(body):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(kept)


def cmd_sweep(args) -> int:
    base = resolve_config(args)
    t1 = base.hyperparameters()
    grid = {}
    for key in _SWEEP_KEYS:
        values = getattr(args, f"grid_{key}")
        grid[key] = values if values else [t1[key]]
    n_combos = int(np.prod([len(v) for v in grid.values()]))
    if n_combos > MAX_SWEEP_COMBINATIONS:
        raise UsageError(f"sweep grid has {n_combos} combinations (limit {MAX_SWEEP_COMBINATIONS})")
    seq, truth, files = _load_input(args.input, args.format)
    input_hash = hash_files(files)
    out = Path(args.out)
    log_path = Path(args.log) if args.log else out.with_name(out.name + ".log")
    done = _read_log(log_path, input_hash)
    _prune_csv(out, set(done))
    if not log_path.exists():
        log_path.write_text(f"# input {input_hash}\n")
    workers = base.resolved_workers()

    stacks, mask_cache = {}, {}
    skipped = infeasible = 0
    for combo in itertools.product(*grid.values()):
        flat = dict(zip(_SWEEP_KEYS, combo))
        try:
            config = base.replace(**flat)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        key = config.digest()
        if key in done:
            skipped += 1
            continue
        dkey = config.denoise
        if dkey not in stacks:
            stacks[dkey] = sequence_saliency(seq, config, workers)
        mkey = (dkey, config.roi)
        if mkey not in mask_cache:
            mask_cache[mkey] = masks_from_saliency(stacks[dkey], config.roi)
        masks = mask_cache[mkey]
        extra = {"config_hash": key, **{k: _csv_flat(v) for k, v in flat.items()}}
        cov = metrics.coverage(masks, truth) if truth is not None else None
        extra["coverage"] = "" if cov is None else repr(round(cov.coverage_rate, 6))
        extra["mask_fraction"] = repr(round(float(np.mean([m.mean() for m in masks])), 6))
        try:
            rows = metrics.rate_curve(seq, config, [config.codec.compression_rate], masks=masks, truth=truth, workers=workers)
        except FrameError as exc:
            if not isinstance(exc.cause, InfeasibleRateError):
                raise
            infeasible += 1
            print(f"flowroi: combination {flat} infeasible: {exc}", file=sys.stderr)
            with open(log_path, "a") as fh:
                fh.write(f"{key}\tinfeasible\t{exc}\n")
            continue
        metrics.write_rate_csv(rows, out, extra=extra, append=True)
        with open(log_path, "a") as fh:
            fh.write(f"{key}\tok\n")
    report = {
        "command": "sweep",
        "input_hash": input_hash,
        "combinations": n_combos,
        "resumed_skipped": skipped,
        "infeasible": infeasible,
        "grid": {k: [_csv_flat(v) for v in vals] for k, vals in grid.items()},
    }
    if args.report_out:
        Path(args.report_out).write_text(metrics.to_json(report))
    return EXIT_OK


def _csv_flat(v):
    if isinstance(v, bool):
        return "on" if v else "off"
    return v


def cmd_plot(args) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with open(args.csv, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise FlowRoiError(f"{args.csv}: no rows")
    # one series per method and per combination of the non-rate parameters
    fixed = [k for k in _SWEEP_KEYS if k != "compression_rate" and k in rows[0]]
    combos = sorted({tuple(r[k] for k in fixed) for r in rows})
    series = {}
    for r in rows:
        if r.get(args.metric, "") == "":
            continue
        combo = tuple(r[k] for k in fixed)
        label = "FlowRoI" if r["method"] == "flowroi" else "uniform"
        if len(combos) > 1:
            label += " (" + ", ".join(f"{k}={v}" for k, v in zip(fixed, combo)) + ")"
        value = float(r[args.metric])
        series.setdefault(label, []).append((float(r["rate"]), value))

    plt.rcParams["svg.hashsalt"] = "flowroi"
    fig, ax = plt.subplots(figsize=(6, 4))
    for label in sorted(series):
        pts = sorted(series[label])
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=label)
    ax.set_xlabel("compression rate")
    ax.set_ylabel(f"PSNR (dB), {args.metric.replace('psnr_', '')}")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.out, format="svg", metadata={"Date": None})
    plt.close(fig)
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"{exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FlowRoiError, OSError) as exc:
        print(f"flowroi: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

"""
Image sequences: frames, PGM/PBM I/O and a synthetic migration generator.

Frames are plain 2-D ``uint8``/``uint16`` arrays wrapped with their bit
depth. The canonical on-disk format is binary PGM (P5), 16-bit samples
big-endian, and masks are written as 1-bit PBM (P4).
"""

from __future__ import annotations

import re
from collections.abc import Iterator
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import SequenceError

__all__ = [
    "Frame",
    "Sequence",
    "GroundTruth",
    "SyntheticSpec",
    "load_sequence",
    "save_frame",
    "load_frame",
    "read_pgm",
    "write_pgm",
    "read_pbm",
    "write_pbm",
    "generate_synthetic",
]

FORMATS = ("pgm", "png", "tiff-gray")
_EXTENSIONS = {"pgm": (".pgm",), "png": (".png",), "tiff-gray": (".tif", ".tiff")}


@dataclass(frozen=True)
class Frame:
    """A single grayscale image.

    Parameters
    ----------
    pixels : ndarray, shape (height, width)
        Unsigned integer samples, row-major.
    depth : int
        Bits per sample, 8 or 16.
    """

    pixels: np.ndarray
    depth: int = 8

    def __post_init__(self):
        if self.depth not in (8, 16):
            raise SequenceError(f"unsupported bit depth {self.depth} (expected 8 or 16)")
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise SequenceError(f"frame must be a non-empty 2-D array, got shape {px.shape}")
        dtype = np.uint8 if self.depth == 8 else np.uint16
        if px.dtype != dtype:
            if px.size and (px.min() < 0 or px.max() >= 1 << self.depth):
                raise SequenceError(f"sample values exceed {self.depth}-bit range")
            px = px.astype(dtype)
        px = np.ascontiguousarray(px)
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    @property
    def max_value(self) -> int:
        return (1 << self.depth) - 1

    @property
    def raw_bytes(self) -> int:
        return self.width * self.height * (self.depth // 8)

    def normalized(self) -> np.ndarray:
        """Samples as float64 scaled to [0, 1]."""
        return self.pixels.astype(np.float64) / self.max_value

    def __eq__(self, other):
        if not isinstance(other, Frame):
            return NotImplemented
        return self.depth == other.depth and np.array_equal(self.pixels, other.pixels)

    __hash__ = None


@dataclass(frozen=True)
class Sequence:
    """Temporally ordered frames sharing size and depth."""

    frames: tuple
    frame_interval: float = 8.0

    def __post_init__(self):
        frames = tuple(self.frames)
        if frames:
            ref = frames[0]
            for i, f in enumerate(frames):
                if f.shape != ref.shape:
                    raise SequenceError(
                        f"frame {i} has size {f.width}x{f.height}, expected {ref.width}x{ref.height}"
                    )
                if f.depth != ref.depth:
                    raise SequenceError(f"frame {i} has depth {f.depth}, expected {ref.depth}")
        object.__setattr__(self, "frames", frames)

    def __len__(self) -> int:
        return len(self.frames)

    def __getitem__(self, i) -> Frame:
        return self.frames[i]

    def __iter__(self) -> Iterator[Frame]:
        return iter(self.frames)

    @property
    def shape(self) -> tuple[int, int]:
        return self.frames[0].shape

    @property
    def depth(self) -> int:
        return self.frames[0].depth


@dataclass(frozen=True)
class GroundTruth:
    """Generator ground truth aligned with a synthetic Sequence.

    Attributes
    ----------
    masks : ndarray of bool, shape (n_frames, height, width)
        Union of all cell disks per frame.
    trajectories : tuple of ndarray, each shape (n_frames, 4)
        Per cell rows of ``(frame, x, y, radius)``.
    contrasts : ndarray
        Peak intensity contrast of each cell, in gray levels of the frame depth.
    noise_sigma : float
        Background noise standard deviation, in gray levels of the frame depth.
    """

    masks: np.ndarray
    trajectories: tuple
    contrasts: np.ndarray
    noise_sigma: float

    @property
    def n_cells(self) -> int:
        return len(self.trajectories)

    @property
    def n_frames(self) -> int:
        return self.masks.shape[0]

    def cell_mask(self, t: int, cell: int) -> np.ndarray:
        """Boolean disk of one cell in frame ``t``."""
        _, x, y, r = self.trajectories[cell][t]
        h, w = self.masks.shape[1:]
        return _disk(h, w, x, y, r)

    def cell_masks(self, t: int) -> list[tuple[slice, np.ndarray]]:
        """Per-cell ``(bbox, disk)`` pairs for frame ``t``; cheaper than full-frame masks."""
        h, w = self.masks.shape[1:]
        out = []
        for traj in self.trajectories:
            _, x, y, r = traj[t]
            out.append(_disk_bbox(h, w, x, y, r))
        return out


def _disk_bbox(h, w, x, y, r):
    y0, y1 = max(int(np.floor(y - r)), 0), min(int(np.ceil(y + r)) + 1, h)
    x0, x1 = max(int(np.floor(x - r)), 0), min(int(np.ceil(x + r)) + 1, w)
    yy, xx = np.mgrid[y0:y1, x0:x1]
    disk = (xx - x) ** 2 + (yy - y) ** 2 <= r * r
    return (slice(y0, y1), slice(x0, x1)), disk


def _disk(h, w, x, y, r):
    m = np.zeros((h, w), dtype=bool)
    box, disk = _disk_bbox(h, w, x, y, r)
    m[box] = disk
    return m


# --------------------------------------------------------------------------
# Netpbm I/O
# --------------------------------------------------------------------------

_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n?)*(\S+)")


def _read_header(data: bytes, n_tokens: int) -> tuple[list[int], int]:
    pos = 2
    values = []
    for _ in range(n_tokens):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise SequenceError("truncated netpbm header")
        values.append(int(m.group(1)))
        pos = m.end()
    # exactly one whitespace byte separates header from raster
    return values, pos + 1


def read_pgm(path) -> Frame:
    data = Path(path).read_bytes()
    if data[:2] != b"P5":
        raise SequenceError(f"{path}: not a binary PGM (P5) file")
    (w, h, maxval), off = _read_header(data, 3)
    if maxval < 1 or maxval > 65535:
        raise SequenceError(f"{path}: invalid maxval {maxval}")
    if maxval < 256:
        px = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=off)
        depth = 8
    else:
        px = np.frombuffer(data, dtype=">u2", count=w * h, offset=off).astype(np.uint16)
        depth = 16
    return Frame(px.reshape(h, w).copy(), depth)


def write_pgm(frame: Frame, path) -> None:
    maxval = frame.max_value
    header = f"P5\n{frame.width} {frame.height}\n{maxval}\n".encode("ascii")
    body = frame.pixels.astype(">u2").tobytes() if frame.depth == 16 else frame.pixels.tobytes()
    with open(path, "wb") as fh:
        fh.write(header + body)


def read_pbm(path) -> np.ndarray:
    """Read a P4 bitmap; set bits (black) map to ``True``."""
    data = Path(path).read_bytes()
    if data[:2] != b"P4":
        raise SequenceError(f"{path}: not a binary PBM (P4) file")
    (w, h), off = _read_header(data, 2)
    row_bytes = (w + 7) // 8
    raw = np.frombuffer(data, dtype=np.uint8, count=row_bytes * h, offset=off)
    bits = np.unpackbits(raw.reshape(h, row_bytes), axis=1)[:, :w]
    return bits.astype(bool)


def write_pbm(mask: np.ndarray, path) -> None:
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    packed = np.packbits(mask, axis=1)
    with open(path, "wb") as fh:
        fh.write(f"P4\n{w} {h}\n".encode("ascii") + packed.tobytes())


def load_frame(path, format: str | None = None) -> Frame:
    path = Path(path)
    if format is None:
        format = _format_from_suffix(path)
    if format == "pgm":
        return read_pgm(path)
    if format in ("png", "tiff-gray"):
        from PIL import Image  # optional dependency

        with Image.open(path) as im:
            arr = np.array(im)
        if arr.ndim != 2:
            raise SequenceError(f"{path}: only single-channel images are supported")
        if arr.dtype == np.uint8:
            return Frame(arr, 8)
        if arr.dtype in (np.uint16, np.int32) and arr.min() >= 0 and arr.max() < 65536:
            return Frame(arr.astype(np.uint16), 16)
        raise SequenceError(f"{path}: unsupported sample type {arr.dtype}")
    raise SequenceError(f"unsupported format {format!r}")


def save_frame(frame: Frame, path, format: str | None = None) -> None:
    """Write ``frame`` so that :func:`load_frame` returns an identical Frame."""
    path = Path(path)
    if format is None:
        format = _format_from_suffix(path)
    if format == "pgm":
        write_pgm(frame, path)
    elif format in ("png", "tiff-gray"):
        from PIL import Image

        Image.fromarray(frame.pixels).save(path, format="PNG" if format == "png" else "TIFF")
    else:
        raise SequenceError(f"unsupported format {format!r}")


def _format_from_suffix(path: Path) -> str:
    suffix = path.suffix.lower()
    for fmt, exts in _EXTENSIONS.items():
        if suffix in exts:
            return fmt
    raise SequenceError(f"cannot infer image format from {path.name!r}")


def list_frames(path, format: str = "pgm") -> list[Path]:
    if format not in FORMATS:
        raise SequenceError(f"unsupported format {format!r}")
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such directory: {path}")
    if not path.is_dir():
        raise SequenceError(f"{path} is not a directory")
    exts = _EXTENSIONS[format]
    return sorted(p for p in path.iterdir() if p.is_file() and p.suffix.lower() in exts)


def load_sequence(path, format: str = "pgm", frame_interval: float = 8.0) -> Sequence:
    """Load every frame in ``path`` in lexicographic filename order."""
    files = list_frames(path, format)
    if not files:
        raise SequenceError(f"empty sequence: no {format} frames in {path}")
    return Sequence(tuple(load_frame(p, format) for p in files), frame_interval)


# --------------------------------------------------------------------------
# Synthetic benchmark
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the synthetic migration generator.

    Intensities (``contrast_range``, ``noise_sigma``, ``background_level``,
    ``texture_amplitude``) are in 8-bit gray levels; for 16-bit output they
    are scaled by 257.
    """

    n_cells: int = 20
    cell_radius_range: tuple = (5.0, 15.0)
    contrast_range: tuple = (20.0, 60.0)
    speed_range: tuple = (1.0, 3.0)
    noise_sigma: float = 4.0
    n_frames: int = 50
    width: int = 512
    height: int = 512
    seed: int = 0
    depth: int = 8
    low_contrast_fraction: float = 0.05
    background_level: float = 90.0
    texture_amplitude: float = 6.0
    texture_scale: float = 3.0
    drift_max: int = 0
    frame_interval: float = 8.0

    def __post_init__(self):
        for name in ("cell_radius_range", "contrast_range", "speed_range"):
            lo, hi = getattr(self, name)
            object.__setattr__(self, name, (float(lo), float(hi)))
            if not (0 < lo <= hi):
                raise SequenceError(f"{name} must be a positive (lo, hi) range, got {(lo, hi)}")
        if self.n_cells < 0:
            raise SequenceError("n_cells must be >= 0")
        if self.n_frames < 1 or self.width < 1 or self.height < 1:
            raise SequenceError("n_frames, width and height must be positive")
        if self.noise_sigma <= 0:
            raise SequenceError("noise_sigma must be positive")
        if self.depth not in (8, 16):
            raise SequenceError("depth must be 8 or 16")
        if self.texture_scale <= 0:
            raise SequenceError("texture_scale must be positive")
        if not 0 <= self.low_contrast_fraction <= 1:
            raise SequenceError("low_contrast_fraction must lie in [0, 1]")
        half = min(self.width, self.height) / 2
        if self.cell_radius_range[1] + self.drift_max >= half:
            raise SequenceError(
                f"cell radius {self.cell_radius_range[1]} exceeds image half-size {half}"
            )

    def to_kv(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(repr(x) for x in v)
            lines.append(f"{f.name}={v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_kv(cls, text: str) -> SyntheticSpec:
        kwargs = {}
        types = {f.name: f.type for f in fields(cls)}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SequenceError(f"line {lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in types:
                raise SequenceError(f"line {lineno}: unknown key {key!r}")
            kwargs[key] = _parse_value(types[key], value)
        return cls(**kwargs)

    def as_dict(self) -> dict:
        return asdict(self)


def _parse_value(typ, value: str):
    typ = str(typ)
    if typ == "tuple":
        return tuple(float(v) for v in value.split(","))
    if typ == "int":
        return int(value)
    return float(value)


def _illumination(h, w):
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    return 12.0 * (xx / max(w - 1, 1) - 0.5) + 8.0 * (yy / max(h - 1, 1) - 0.5)


def generate_synthetic(spec: SyntheticSpec) -> tuple[Sequence, GroundTruth]:
    """Render Gaussian-profile cells on random walks over a noisy background.

    Deterministic for a fixed ``spec.seed``. A fraction of the cells
    (``round(low_contrast_fraction * n_cells)``) gets a peak contrast in
    ``[0.75, 1.5] * noise_sigma``, the regime in which motion detection
    is expected to miss cells.
    """
    rng = np.random.default_rng(spec.seed)
    h, w, T = spec.height, spec.width, spec.n_frames
    pad = spec.drift_max
    scale = 1.0 if spec.depth == 8 else 257.0
    maxval = (1 << spec.depth) - 1

    # static background: illumination gradient plus smooth texture
    tex = rng.standard_normal((h + 2 * pad, w + 2 * pad))
    tex = ndimage.gaussian_filter(tex, spec.texture_scale, mode="wrap")
    tex *= spec.texture_amplitude / max(tex.std(), 1e-12)
    world_bg = spec.background_level + tex
    world_bg[pad : pad + h, pad : pad + w] += _illumination(h, w)

    # global drift of the field of view, as an integer random walk
    offsets = np.zeros((T, 2), dtype=int)
    for t in range(1, T):
        step = rng.integers(-1, 2, size=2) if pad else np.zeros(2, dtype=int)
        offsets[t] = np.clip(offsets[t - 1] + step, -pad, pad)

    n = spec.n_cells
    n_low = int(round(spec.low_contrast_fraction * n))
    radii = rng.uniform(*spec.cell_radius_range, size=n)
    contrasts = rng.uniform(*spec.contrast_range, size=n)
    speeds = rng.uniform(*spec.speed_range, size=n)
    low_ids = rng.choice(n, size=n_low, replace=False) if n_low else np.array([], dtype=int)
    contrasts[low_ids] = rng.uniform(0.75, 1.5, size=n_low) * spec.noise_sigma

    # world coordinates: frame pixel = world - pad - offset
    traj = np.zeros((n, T, 2))
    for i in range(n):
        lo = radii[i] + 2 * pad + 1
        x_hi, y_hi = w - 1 - radii[i] - 1, h - 1 - radii[i] - 1
        pos = np.array([rng.uniform(lo, x_hi), rng.uniform(lo, y_hi)])
        heading = rng.uniform(0, 2 * np.pi)
        for t in range(T):
            traj[i, t] = pos
            heading += rng.normal(0.0, 0.6)
            pos = pos + speeds[i] * np.array([np.cos(heading), np.sin(heading)])
            for k, hi in ((0, x_hi), (1, y_hi)):
                if pos[k] < lo:
                    pos[k] = 2 * lo - pos[k]
                    heading = np.pi - heading if k == 0 else -heading
                elif pos[k] > hi:
                    pos[k] = 2 * hi - pos[k]
                    heading = np.pi - heading if k == 0 else -heading
                pos[k] = min(max(pos[k], lo), hi)

    frames = []
    masks = np.zeros((T, h, w), dtype=bool)
    trajectories = [np.zeros((T, 4)) for _ in range(n)]
    for t in range(T):
        ox, oy = offsets[t]
        img = world_bg[pad + oy : pad + oy + h, pad + ox : pad + ox + w].copy()
        for i in range(n):
            x = traj[i, t, 0] - pad - ox
            y = traj[i, t, 1] - pad - oy
            r = radii[i]
            trajectories[i][t] = (t, x, y, r)
            sigma = r / 2.0
            ext = 2.5 * r
            y0, y1 = max(int(y - ext), 0), min(int(y + ext) + 2, h)
            x0, x1 = max(int(x - ext), 0), min(int(x + ext) + 2, w)
            yy, xx = np.mgrid[y0:y1, x0:x1]
            d2 = (xx - x) ** 2 + (yy - y) ** 2
            img[y0:y1, x0:x1] += contrasts[i] * np.exp(-d2 / (2 * sigma * sigma))
            masks[t, y0:y1, x0:x1] |= d2 <= r * r
        img += rng.normal(0.0, spec.noise_sigma, size=(h, w))
        px = np.clip(np.rint(img * scale), 0, maxval)
        frames.append(Frame(px.astype(np.uint8 if spec.depth == 8 else np.uint16), spec.depth))

    truth = GroundTruth(
        masks=masks,
        trajectories=tuple(trajectories),
        contrasts=contrasts * scale,
        noise_sigma=spec.noise_sigma * scale,
    )
    return Sequence(tuple(frames), spec.frame_interval), truth


def write_dataset(sequence: Sequence, truth: GroundTruth | None, out_dir, spec: SyntheticSpec | None = None) -> None:
    """Write frames (``frames/NNNN.pgm``), truth masks and trajectories."""
    out_dir = Path(out_dir)
    (out_dir / "frames").mkdir(parents=True, exist_ok=True)
    width = max(4, len(str(len(sequence) - 1)))
    for t, frame in enumerate(sequence):
        write_pgm(frame, out_dir / "frames" / f"{t:0{width}d}.pgm")
    if truth is not None:
        (out_dir / "truth").mkdir(exist_ok=True)
        for t in range(truth.n_frames):
            write_pbm(truth.masks[t], out_dir / "truth" / f"{t:0{width}d}.pbm")
        with open(out_dir / "trajectories.csv", "w") as fh:
            fh.write("cell,frame,x,y,radius,contrast\n")
            for i, traj in enumerate(truth.trajectories):
                for t, x, y, r in traj:
                    fh.write(f"{i},{int(t)},{float(x)!r},{float(y)!r},{float(r)!r},{float(truth.contrasts[i])!r}\n")
    if spec is not None:
        (out_dir / "manifest.txt").write_text(spec.to_kv())


def read_truth(dataset_dir) -> GroundTruth:
    """Inverse of the truth part of :func:`write_dataset`."""
    dataset_dir = Path(dataset_dir)
    mask_files = sorted((dataset_dir / "truth").glob("*.pbm"))
    if not mask_files:
        raise SequenceError(f"no truth masks in {dataset_dir}")
    masks = np.stack([read_pbm(p) for p in mask_files])
    rows = np.loadtxt(dataset_dir / "trajectories.csv", delimiter=",", skiprows=1, ndmin=2)
    n_cells = int(rows[:, 0].max()) + 1 if rows.size else 0
    trajectories, contrasts = [], np.zeros(n_cells)
    for i in range(n_cells):
        sel = rows[rows[:, 0] == i]
        sel = sel[np.argsort(sel[:, 1])]
        trajectories.append(sel[:, 1:5].copy())
        contrasts[i] = sel[0, 5]
    spec_path = dataset_dir / "manifest.txt"
    sigma = float("nan")
    if spec_path.exists():
        spec = SyntheticSpec.from_kv(spec_path.read_text())
        sigma = spec.noise_sigma * (257.0 if spec.depth == 16 else 1.0)
    return GroundTruth(masks, tuple(trajectories), contrasts, sigma)

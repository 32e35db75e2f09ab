"""
Motion-saliency RoI masks from dense flow.

Per frame: denoise, register the predecessor, estimate flow, fuse flow
magnitude with image-gradient magnitude into a saliency map, keep the top
``roi_threshold`` fraction of pixels, clean the mask morphologically and
finally union it with the masks of ``adjacent_factor`` neighbours.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
from scipy import ndimage

from .errors import SequenceError
from .flow import FlowField, compute_flow
from .preprocess import denoise, register
from .sequence import Frame, Sequence
from .timing import stage

if TYPE_CHECKING:
    from .config import PipelineConfig

__all__ = [
    "RoiParams",
    "SaliencyStack",
    "normalize",
    "saliency",
    "threshold_mask",
    "morph_cleanup",
    "temporal_ensemble",
    "sequence_saliency",
    "masks_from_saliency",
    "extract_roi",
]

FLOW_WEIGHT = 0.7


@dataclass(frozen=True)
class RoiParams:
    roi_threshold: float = 0.2
    flow_weight: float = FLOW_WEIGHT
    adjacent_factor: int = 0
    min_area: int = 20
    open_radius: int = 1
    close_radius: int = 1
    gradient_source: str = "image"
    normalization: str = "frame"

    def __post_init__(self):
        if not 0 < self.roi_threshold < 1:
            raise ValueError(f"roi_threshold must lie in (0, 1), got {self.roi_threshold}")
        if not 0 <= self.flow_weight <= 1:
            raise ValueError("flow_weight must lie in [0, 1]")
        if self.adjacent_factor < 0:
            raise ValueError("adjacent_factor must be >= 0")
        if self.min_area < 0 or self.open_radius < 0 or self.close_radius < 0:
            raise ValueError("min_area and morphology radii must be >= 0")
        if self.gradient_source not in ("image", "flow"):
            raise ValueError("gradient_source must be 'image' or 'flow'")
        if self.normalization not in ("frame", "sequence"):
            raise ValueError("normalization must be 'frame' or 'sequence'")


def normalize(values: np.ndarray, lo: float | None = None, hi: float | None = None) -> np.ndarray:
    """Map the 1st percentile to 0 and the 99th to 1, clamped.

    A map without spread normalizes to all zeros.
    """
    values = np.asarray(values, dtype=np.float64)
    if lo is None or hi is None:
        lo, hi = np.percentile(values, [1.0, 99.0])
    span = hi - lo
    if not span > 1e-12 * max(1.0, abs(hi)):
        return np.zeros_like(values)
    return np.clip((values - lo) / span, 0.0, 1.0)


def gradient_magnitude(image: np.ndarray) -> np.ndarray:
    gy, gx = np.gradient(np.asarray(image, dtype=np.float64))
    return np.hypot(gx, gy)


def flow_gradient_magnitude(flow: FlowField) -> np.ndarray:
    uy, ux = np.gradient(flow.u)
    vy, vx = np.gradient(flow.v)
    return np.sqrt(ux * ux + uy * uy + vx * vx + vy * vy)


def saliency(flow: FlowField, frame, flow_weight: float = FLOW_WEIGHT, gradient_source: str = "image") -> np.ndarray:
    """``w * N(|flow|) + (1 - w) * N(|grad|)`` with per-frame robust normalization."""
    img = frame.normalized() if isinstance(frame, Frame) else np.asarray(frame, dtype=np.float64)
    if flow.shape != img.shape:
        raise SequenceError(f"flow {flow.shape} and frame {img.shape} dimensions differ")
    grad = gradient_magnitude(img) if gradient_source == "image" else flow_gradient_magnitude(flow)
    return flow_weight * normalize(flow.magnitude()) + (1.0 - flow_weight) * normalize(grad)


def threshold_mask(saliency_map: np.ndarray, roi_threshold: float) -> np.ndarray:
    """Keep the ``round(roi_threshold * n)`` most salient pixels.

    Pixels tied at the cut-off value are taken in row-major order until the
    count is met.
    """
    if not 0 < roi_threshold < 1:
        raise ValueError(f"roi_threshold must lie in (0, 1), got {roi_threshold}")
    flat = np.asarray(saliency_map, dtype=np.float64).ravel()
    n = flat.size
    k = int(round(roi_threshold * n))
    mask = np.zeros(n, dtype=bool)
    if k > 0:
        cut = np.partition(flat, n - k)[n - k]
        above = flat > cut
        mask[above] = True
        ties = np.flatnonzero(flat == cut)[: k - int(above.sum())]
        mask[ties] = True
    return mask.reshape(np.shape(saliency_map))


def _square(radius: int) -> np.ndarray:
    return np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)


def _erode(mask, radius):
    # outside the image counts as foreground so borders are not eaten
    return ndimage.binary_erosion(mask, _square(radius), border_value=1)


def _dilate(mask, radius):
    return ndimage.binary_dilation(mask, _square(radius), border_value=0)


def remove_small_components(mask: np.ndarray, min_area: int) -> np.ndarray:
    """Drop 8-connected components with fewer than ``min_area`` pixels."""
    if min_area <= 1:
        return mask.copy()
    labels, n = ndimage.label(mask, structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        return mask.copy()
    areas = np.bincount(labels.ravel())
    keep = areas >= min_area
    keep[0] = False
    return keep[labels]


def morph_cleanup(mask: np.ndarray, open_radius: int = 1, close_radius: int = 1, min_area: int = 20) -> np.ndarray:
    """Opening, closing (square elements), then small-component removal."""
    m = np.asarray(mask, dtype=bool)
    if open_radius > 0:
        m = _dilate(_erode(m, open_radius), open_radius)
    if close_radius > 0:
        m = _erode(_dilate(m, close_radius), close_radius)
    return remove_small_components(m, min_area)


def temporal_ensemble(masks, t: int, adjacent_factor: int) -> np.ndarray:
    """Pixel-wise union of ``masks[t - k : t + k + 1]``, clipped to the sequence."""
    lo = max(t - adjacent_factor, 0)
    hi = min(t + adjacent_factor + 1, len(masks))
    out = np.array(masks[t], dtype=bool, copy=True)
    for i in range(lo, hi):
        out |= masks[i]
    return out


@dataclass
class SaliencyStack:
    """Unnormalized saliency terms for frames 1..T-1 of a sequence.

    ``static[i]`` marks pairs without any measurable motion (a flow field
    with no spread); their masks are empty.
    """

    flow_mag: list
    grad_mag: list
    shifts: list
    static: list
    flow_weight: float = FLOW_WEIGHT
    normalization: str = "frame"
    _maps: list = field(default=None, repr=False)

    def __len__(self):
        return len(self.flow_mag) + 1

    def maps(self) -> list:
        """Normalized saliency maps, index ``i`` belonging to frame ``i + 1``."""
        if self._maps is None:
            if self.normalization == "sequence":
                fl = np.percentile(np.stack(self.flow_mag), [1.0, 99.0])
                gl = np.percentile(np.stack(self.grad_mag), [1.0, 99.0])
            else:
                fl = gl = (None, None)
            w = self.flow_weight
            self._maps = [
                w * normalize(f, *fl) + (1.0 - w) * normalize(g, *gl)
                for f, g in zip(self.flow_mag, self.grad_mag)
            ]
        return self._maps


def usable_shift(max_shift: int, shape) -> int:
    """Largest allowed search radius not above ``max_shift`` for this frame size."""
    limit = max(-(-min(shape) // 4) - 1, 0)
    return min(max_shift, limit)


def _pair_terms(prev_d: Frame, cur_d: Frame, config: PipelineConfig, timer=None):
    """Flow and gradient magnitude for one (denoised) pair, on ``cur_d``'s grid."""
    with stage(timer, "flow"):
        # bring the predecessor into the current frame's coordinates so the
        # mask lines up with the frame that will be encoded
        prev_aligned, shift = register(cur_d, prev_d, usable_shift(config.max_shift, cur_d.shape))
        flow = compute_flow(cur_d, prev_aligned, config.flow)
    with stage(timer, "roi"):
        mag = flow.magnitude()
        if config.roi.gradient_source == "image":
            grad = gradient_magnitude(cur_d.normalized())
        else:
            grad = flow_gradient_magnitude(flow)
        static = not np.ptp(mag) > 1e-9
    return mag.astype(np.float32), grad.astype(np.float32), shift, static


def parallel_map(fn, items, workers: int) -> list:
    """``[fn(*item) for item in items]``, on a thread pool when ``workers > 1``."""
    if workers <= 1:
        return [fn(*it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(lambda it: fn(*it), items))


def denoise_sequence(sequence: Sequence, params, workers: int = 1, timer=None) -> list:
    def one(frame):
        with stage(timer, "denoise"):
            return denoise(frame, params)

    return parallel_map(one, [(f,) for f in sequence], workers)


def sequence_saliency(sequence: Sequence, config: PipelineConfig, workers: int = 1, timer=None) -> SaliencyStack:
    """Saliency terms for every consecutive pair; each frame is denoised once."""
    if len(sequence) < 2:
        raise SequenceError("RoI extraction needs at least 2 frames")
    clean = denoise_sequence(sequence, config.denoise, workers, timer)
    pairs = [(clean[t - 1], clean[t], config, timer) for t in range(1, len(clean))]
    terms = parallel_map(_pair_terms, pairs, workers)
    return SaliencyStack(
        flow_mag=[t[0] for t in terms],
        grad_mag=[t[1] for t in terms],
        shifts=[t[2] for t in terms],
        static=[t[3] for t in terms],
        flow_weight=config.roi.flow_weight,
        normalization=config.roi.normalization,
    )


def masks_from_saliency(stack: SaliencyStack, params: RoiParams) -> list:
    """Threshold, clean and ensemble; returns one mask per frame (frame 0 copies frame 1)."""
    raw = []
    for smap, static in zip(stack.maps(), stack.static):
        if static:
            raw.append(np.zeros(smap.shape, dtype=bool))
            continue
        m = threshold_mask(smap, params.roi_threshold)
        raw.append(morph_cleanup(m, params.open_radius, params.close_radius, params.min_area))
    raw.insert(0, raw[0].copy())
    if params.adjacent_factor == 0:
        return raw
    return [temporal_ensemble(raw, t, params.adjacent_factor) for t in range(len(raw))]


def extract_roi(sequence: Sequence, config: PipelineConfig, workers: int | None = None, timer=None) -> list:
    """RoI mask for every frame of ``sequence``."""
    if workers is None:
        workers = config.resolved_workers()
    stack = sequence_saliency(sequence, config, workers, timer)
    with stage(timer, "roi"):
        return masks_from_saliency(stack, config.roi)

"""
Pipeline configuration and its flat ``key=value`` file format.

Keys are the dotted-free names below (``roi_threshold``, ``denoise``,
``scaling_factor`` ...); dashes and underscores are interchangeable.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field

from .codec import CodecParams
from .flow import FlowParams
from .preprocess import DenoiseParams
from .roi import RoiParams

__all__ = ["PipelineConfig", "config_keys", "parse_kv", "format_kv"]


@dataclass(frozen=True)
class PipelineConfig:
    denoise: DenoiseParams = field(default_factory=DenoiseParams)
    flow: FlowParams = field(default_factory=FlowParams)
    roi: RoiParams = field(default_factory=RoiParams)
    codec: CodecParams = field(default_factory=CodecParams)
    max_shift: int = 16
    workers: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.workers < 0:
            raise ValueError("workers must be >= 0 (0 = one per CPU)")
        if self.max_shift < 0:
            raise ValueError("max_shift must be >= 0")

    def resolved_workers(self) -> int:
        return self.workers or (os.cpu_count() or 1)

    def replace(self, **flat) -> PipelineConfig:
        """Copy with flat keys (as in the config file) overridden."""
        groups = {"denoise": {}, "flow": {}, "roi": {}, "codec": {}}
        top = {}
        for key, value in flat.items():
            section, name = _KEYS[_norm(key)]
            if section is None:
                top[name] = value
            else:
                groups[section][name] = value
        kwargs = dict(top)
        for section, changes in groups.items():
            if changes:
                kwargs[section] = dataclasses.replace(getattr(self, section), **changes)
        return dataclasses.replace(self, **kwargs)

    def as_flat(self) -> dict:
        out = {}
        for key, (section, name) in _KEYS.items():
            obj = self if section is None else getattr(self, section)
            out[key] = getattr(obj, name)
        return out

    def hyperparameters(self) -> dict:
        """The five user-facing hyperparameters."""
        return {
            "denoise": self.denoise.enabled,
            "roi_threshold": self.roi.roi_threshold,
            "adjacent_factor": self.roi.adjacent_factor,
            "scaling_factor": self.codec.scaling_factor,
            "compression_rate": self.codec.compression_rate,
        }

    def digest(self, exclude=("workers",)) -> str:
        """Stable hash of everything that can influence output bytes."""
        flat = {k: v for k, v in self.as_flat().items() if k not in exclude}
        return hashlib.sha256(json.dumps(flat, sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def from_kv(cls, text: str, base: PipelineConfig | None = None) -> PipelineConfig:
        return (base or cls()).replace(**parse_kv(text))


def _norm(key: str) -> str:
    key = key.strip().replace("-", "_")
    if key not in _KEYS:
        raise KeyError(f"unknown configuration key {key!r}")
    return key


# flat key -> (section, attribute)
_KEYS = {
    "denoise": ("denoise", "enabled"),
    "median_radius": ("denoise", "median_radius"),
    "bilateral_sigma_spatial": ("denoise", "bilateral_sigma_spatial"),
    "bilateral_sigma_range": ("denoise", "bilateral_sigma_range"),
    "bilateral_radius": ("denoise", "bilateral_radius"),
    "flow_levels": ("flow", "pyramid_levels"),
    "flow_scale": ("flow", "pyramid_scale"),
    "flow_window": ("flow", "window_size"),
    "flow_iters": ("flow", "iterations"),
    "poly_n": ("flow", "poly_n"),
    "poly_sigma": ("flow", "poly_sigma"),
    "roi_threshold": ("roi", "roi_threshold"),
    "flow_weight": ("roi", "flow_weight"),
    "adjacent_factor": ("roi", "adjacent_factor"),
    "min_area": ("roi", "min_area"),
    "open_radius": ("roi", "open_radius"),
    "close_radius": ("roi", "close_radius"),
    "saliency_gradient": ("roi", "gradient_source"),
    "saliency_normalization": ("roi", "normalization"),
    "scaling_factor": ("codec", "scaling_factor"),
    "compression_rate": ("codec", "compression_rate"),
    "dwt_levels": ("codec", "dwt_levels"),
    "lossless": ("codec", "lossless"),
    "max_shift": (None, "max_shift"),
    "workers": (None, "workers"),
    "seed": (None, "seed"),
}

_BOOL = {"1": True, "true": True, "on": True, "yes": True, "0": False, "false": False, "off": False, "no": False}


def _coerce(key: str, text: str):
    section, name = _KEYS[key]
    default = getattr(PipelineConfig() if section is None else getattr(PipelineConfig(), section), name)
    text = text.strip()
    if isinstance(default, bool):
        try:
            return _BOOL[text.lower()]
        except KeyError:
            raise ValueError(f"{key}: expected on/off, got {text!r}") from None
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    return text


def parse_kv(text: str) -> dict:
    """Parse ``key=value`` lines (``#`` comments allowed) into typed values."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        key = _norm(key)
        out[key] = _coerce(key, value)
    return out


def format_kv(config: PipelineConfig) -> str:
    lines = []
    for key, value in config.as_flat().items():
        if isinstance(value, bool):
            value = "on" if value else "off"
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


def config_keys() -> list:
    return list(_KEYS)

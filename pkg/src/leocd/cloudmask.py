"""Cloud probability maps: a brightness-ramp baseline detector, binarization
and masking of the observed image."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, DataError
from .raster import BandStack, BinaryMap, ScoreMap, load_score_map, tile_map

CLOUD_BANDS = ("R", "G", "B", "Nir")
CLOUD_SOURCES = ("baseline", "external", "none")


@dataclass
class CloudConfig:
    """Cloud stage settings.

    ``brightness_low``/``brightness_high`` are the ramp ends of the baseline
    detector, in z-score units of the normalized RGBNir stack.
    """

    gamma: float = 0.5
    brightness_low: float = 1.0
    brightness_high: float = 2.0
    source: str = "baseline"
    external_path: Optional[str] = None
    mask_reference: bool = False

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError(f"cloud gamma must be in (0, 1), got {self.gamma}")
        if not self.brightness_low < self.brightness_high:
            raise ConfigError("brightness_low must be below brightness_high")
        if self.source not in CLOUD_SOURCES:
            raise ConfigError(f"cloud source must be one of {CLOUD_SOURCES}, got {self.source!r}")
        if (self.source == "external") != (self.external_path is not None):
            raise ConfigError("cloud external_path is required iff source is 'external'")


def detect_clouds_baseline(stack: BandStack, config: CloudConfig, workers: int = 1,
                           tile_shape: tuple[int, int] = (256, 256)) -> ScoreMap:
    """Cloud probability from mean RGBNir brightness, clamped linear ramp."""
    if stack.bands != 4 or sorted(stack.band_labels) != sorted(CLOUD_BANDS):
        raise DataError(f"baseline cloud detector needs bands {CLOUD_BANDS}, got {stack.band_labels}")
    lo, hi = config.brightness_low, config.brightness_high

    def ramp(planes):
        return np.clip((planes.mean(axis=0) - lo) / (hi - lo), 0.0, 1.0)

    return ScoreMap(tile_map(ramp, [stack.samples], tile_shape, workers))


def load_cloud_probability(path, expected_shape: tuple[int, int] | None = None) -> ScoreMap:
    return load_score_map(path, expected_shape)


def binarize(prob: ScoreMap, gamma: float) -> BinaryMap:
    if not 0.0 < gamma < 1.0:
        raise ConfigError(f"gamma must be in (0, 1), got {gamma}")
    return BinaryMap(prob.values >= gamma)


def apply_mask(stack: BandStack, cloud: BinaryMap) -> BandStack:
    """Zero every band of the cloudy pixels (multiply by the mask complement)."""
    if cloud.shape != (stack.height, stack.width):
        raise DataError(f"cloud mask {cloud.shape} does not match image {stack.height}x{stack.width}")
    keep = (1 - cloud.values).astype(np.float64)
    return stack.replace(stack.samples * keep[None])


def union(a: BinaryMap, b: BinaryMap) -> BinaryMap:
    if a.shape != b.shape:
        raise DataError("mask geometries differ")
    return BinaryMap(a.values | b.values)

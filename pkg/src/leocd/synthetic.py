"""Seeded synthetic image pairs with known change and cloud maps.

The generator uses numpy's ``Generator(PCG64(seed))`` and draws, in this
exact order:

1. reference samples: ``integers(500, 2501, size=(D, H, W))``
2. a pixel permutation: ``permutation(H*W)``; the first
   ``round(change_fraction*H*W)`` flat indices change, the next
   ``round(cloud_fraction*H*W)`` are clouded (clouds never overlap changes)
3. change magnitudes ``integers(300, 701, size=(D, k))`` and signs
   ``integers(0, 2, size=(D, k))`` (0 means negative) for the k changed
   pixels in permutation order; a step leaving [500, 2500] is reflected to
   the opposite sign
4. only if ``noise_std > 0``: ``normal(0, noise_std, size=(D, H, W))`` added
   to the observed image

Clouded pixels of the observed image are then saturated at 4095 in every
band. ``round`` here is half-up: ``floor(x + 0.5)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .raster import BandStack, BinaryMap

DEFAULT_LABELS = ("R", "G", "B", "Nir")
VALUE_RANGE = (500, 2500)
CHANGE_RANGE = (300, 700)
CLOUD_VALUE = 4095.0


@dataclass
class SyntheticSpec:
    height: int = 64
    width: int = 64
    bands: int = 4
    change_fraction: float = 0.1
    cloud_fraction: float = 0.0
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.height < 1 or self.width < 1 or self.bands < 1:
            raise ConfigError("synthetic sizes must be positive")
        for name in ("change_fraction", "cloud_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be non-negative")
        if self.n_changed + self.n_clouded > self.height * self.width:
            raise ConfigError("change and cloud fractions together exceed the image")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    @property
    def n_changed(self) -> int:
        return int(math.floor(self.change_fraction * self.height * self.width + 0.5))

    @property
    def n_clouded(self) -> int:
        return int(math.floor(self.cloud_fraction * self.height * self.width + 0.5))


@dataclass
class SyntheticScene:
    reference: BandStack
    observed: BandStack
    change_truth: BinaryMap
    cloud_truth: BinaryMap


def band_labels(n: int) -> list[str]:
    return [DEFAULT_LABELS[k] if k < len(DEFAULT_LABELS) else f"B{k + 1}" for k in range(n)]


def generate_synthetic(spec: SyntheticSpec) -> SyntheticScene:
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    d, h, w = spec.bands, spec.height, spec.width
    lo, hi = VALUE_RANGE
    ref = rng.integers(lo, hi + 1, size=(d, h, w)).astype(np.float64)

    perm = rng.permutation(h * w)
    k, c = spec.n_changed, spec.n_clouded
    changed_idx = perm[:k]
    cloud_idx = perm[k:k + c]

    mags = rng.integers(CHANGE_RANGE[0], CHANGE_RANGE[1] + 1, size=(d, k)).astype(np.float64)
    signs = rng.integers(0, 2, size=(d, k)) * 2 - 1
    obs = ref.copy().reshape(d, h * w)
    base = obs[:, changed_idx]
    step = signs * mags
    moved = base + step
    out_of_range = (moved < lo) | (moved > hi)
    moved[out_of_range] = base[out_of_range] - step[out_of_range]
    obs[:, changed_idx] = moved
    obs = obs.reshape(d, h, w)

    if spec.noise_std > 0:
        obs = obs + rng.normal(0.0, spec.noise_std, size=(d, h, w))

    change = np.zeros(h * w, dtype=np.uint8)
    change[changed_idx] = 1
    cloud = np.zeros(h * w, dtype=np.uint8)
    cloud[cloud_idx] = 1
    obs.reshape(d, h * w)[:, cloud_idx] = CLOUD_VALUE

    labels = band_labels(d)
    return SyntheticScene(
        reference=BandStack(ref, labels, 12),
        observed=BandStack(obs, labels, 12),
        change_truth=BinaryMap(change.reshape(h, w)),
        cloud_truth=BinaryMap(cloud.reshape(h, w)),
    )

"""Change scores, threshold segmentation and miss-rate calibration."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, DataError
from .raster import BandStack, BinaryMap, ScoreMap, load_score_map, tile_map

SCORER_KINDS = ("baseline_distance", "external_file")


@dataclass
class ScorerConfig:
    kind: str = "baseline_distance"
    external_path: Optional[str] = None
    masked_pixel_score: float = 0.0

    def __post_init__(self):
        if self.kind not in SCORER_KINDS:
            raise ConfigError(f"scorer kind must be one of {SCORER_KINDS}, got {self.kind!r}")
        if (self.kind == "external_file") != (self.external_path is not None):
            raise ConfigError("scorer external_path is required iff kind is 'external_file'")
        if not 0.0 <= self.masked_pixel_score <= 1.0:
            raise ConfigError("masked_pixel_score must be in [0, 1]")


@dataclass(frozen=True)
class CalibrationResult:
    tau: float
    achieved_miss_rate: float
    n_changed: int


def score_changes_baseline(
    ref: BandStack,
    obs: BandStack,
    cloud: BinaryMap,
    masked_pixel_score: float = 0.0,
    workers: int = 1,
    tile_shape: tuple[int, int] = (256, 256),
) -> ScoreMap:
    """Euclidean spectral distance between the two images, scaled by its max.

    The maximum is taken over cloud-free pixels only; cloudy pixels get
    ``masked_pixel_score``. A pair with no differences scores zero everywhere.
    """
    if ref.geometry != obs.geometry:
        raise DataError(f"image geometries differ: {ref.geometry} vs {obs.geometry}")
    if cloud.shape != (ref.height, ref.width):
        raise DataError(f"cloud mask {cloud.shape} does not match image {ref.height}x{ref.width}")

    def dist(a, b):
        return np.sqrt(((b - a) ** 2).sum(axis=0))

    d = tile_map(dist, [ref.samples, obs.samples], tile_shape, workers)
    masked = cloud.as_bool()
    clear = d[~masked]
    peak = clear.max() if clear.size else 0.0
    scores = d / peak if peak > 0 else np.zeros_like(d)
    scores[masked] = masked_pixel_score
    return ScoreMap(np.clip(scores, 0.0, 1.0))


def mask_scores(scores: ScoreMap, cloud: BinaryMap, masked_pixel_score: float = 0.0) -> ScoreMap:
    """Force cloudy pixels of an externally produced score map to a fixed value."""
    if scores.shape != cloud.shape:
        raise DataError(f"score map {scores.shape} does not match cloud mask {cloud.shape}")
    out = scores.values.copy()
    out[cloud.as_bool()] = masked_pixel_score
    return ScoreMap(out)


def segment(scores: ScoreMap, tau: float) -> BinaryMap:
    """Predict change where the score reaches ``tau`` (inclusive)."""
    if not 0.0 <= tau <= 1.0:
        raise ConfigError(f"tau must be in [0, 1], got {tau}")
    return BinaryMap(scores.values >= tau)


def max_misses(n_changed: int, epsilon: float) -> int:
    """Largest k with k / n_changed <= epsilon, evaluated in floating point."""
    k = math.floor(epsilon * n_changed)
    while k + 1 <= n_changed and (k + 1) / n_changed <= epsilon:
        k += 1
    while k > 0 and k / n_changed > epsilon:
        k -= 1
    return k


def miss_rate(scores: ScoreMap, truth: BinaryMap, tau: float,
              subset: np.ndarray | None = None) -> float | None:
    """Fraction of changed pixels (within ``subset``) scoring below ``tau``.

    Returns None when the subset holds no changed pixel.
    """
    changed = truth.as_bool()
    if subset is not None:
        changed = changed & subset
    n = int(changed.sum())
    if n == 0:
        return None
    pred = segment(scores, tau).as_bool()
    return int((changed & ~pred).sum()) / n


def calibrate_threshold(scores: ScoreMap, truth: BinaryMap, epsilon: float,
                        subset: np.ndarray | None = None) -> CalibrationResult:
    """Largest tau whose miss rate on the changed pixels is at most ``epsilon``.

    With n changed pixels sorted by score (stable, row-major on ties) at most
    k = max_misses(n, epsilon) of them may fall below tau, so tau is the score
    at position k. Every pixel tied with it is kept by the inclusive segment.
    """
    if not 0.0 <= epsilon < 1.0:
        raise ConfigError(f"epsilon must be in [0, 1), got {epsilon}")
    if scores.shape != truth.shape:
        raise DataError(f"score map {scores.shape} does not match truth {truth.shape}")
    changed = truth.as_bool()
    if subset is not None:
        changed = changed & subset
    cs = scores.values[changed]
    n = cs.size
    if n == 0:
        raise DataError("no changed pixels available for calibration")
    ordered = np.sort(cs, kind="stable")
    k = max_misses(n, epsilon)
    tau = float(ordered[k])
    achieved = miss_rate(scores, truth, tau, changed)
    return CalibrationResult(tau=tau, achieved_miss_rate=achieved, n_changed=n)


def calibration_split(shape: tuple[int, int], fraction: float, seed: int) -> np.ndarray:
    """Boolean mask of the held-in pixels, drawn with PCG64(seed)."""
    if not 0.0 < fraction <= 1.0:
        raise ConfigError(f"calibration fraction must be in (0, 1], got {fraction}")
    n = shape[0] * shape[1]
    if fraction == 1.0:
        return np.ones(shape, dtype=bool)
    k = int(math.floor(fraction * n + 0.5))
    rng = np.random.Generator(np.random.PCG64(seed))
    mask = np.zeros(n, dtype=bool)
    mask[rng.permutation(n)[:k]] = True
    return mask.reshape(shape)


__all__ = [
    "ScorerConfig",
    "CalibrationResult",
    "score_changes_baseline",
    "mask_scores",
    "segment",
    "max_misses",
    "miss_rate",
    "calibrate_threshold",
    "calibration_split",
    "load_score_map",
]

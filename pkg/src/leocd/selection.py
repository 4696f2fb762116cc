"""Transmission decisions and the amount of data they imply."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError, DataError
from .raster import BinaryMap, atomic_write_text, load_binary_map, stem_of, store_binary_map

OVERHEAD_MODES = ("none", "coord_list", "bitmap")
BRUTE_FORCE_MAX_PIXELS = 16


@dataclass
class VolumeConfig:
    """Bits per selected pixel are ``bands_per_pixel * bits_per_sample``.

    ``coordinate_overhead`` adds side information telling the gateway where
    the pixels go: nothing, one (row, col) index pair per pixel, or a full
    H x W bitmap.
    """

    bands_per_pixel: int
    bits_per_sample: int = 12
    coordinate_overhead: str = "none"

    def __post_init__(self):
        if self.bands_per_pixel < 1 or self.bits_per_sample < 1:
            raise ConfigError("bands_per_pixel and bits_per_sample must be >= 1")
        if self.coordinate_overhead not in OVERHEAD_MODES:
            raise ConfigError(
                f"coordinate_overhead must be one of {OVERHEAD_MODES}, got {self.coordinate_overhead!r}"
            )


@dataclass(frozen=True)
class Selection:
    alpha: BinaryMap
    volume_bits: int

    @property
    def n_selected(self) -> int:
        return self.alpha.count


def _index_bits(n: int) -> int:
    return math.ceil(math.log2(n)) if n > 1 else 0


def data_volume(alpha: BinaryMap, cfg: VolumeConfig) -> int:
    k = alpha.count
    bits = k * cfg.bands_per_pixel * cfg.bits_per_sample
    h, w = alpha.shape
    if cfg.coordinate_overhead == "coord_list":
        bits += k * (_index_bits(h) + _index_bits(w))
    elif cfg.coordinate_overhead == "bitmap":
        bits += h * w
    return bits


def build_selection(pred: BinaryMap, cfg: VolumeConfig) -> Selection:
    """Select exactly the predicted-change pixels (the least alpha >= pred)."""
    alpha = BinaryMap(pred.values.copy())
    return Selection(alpha, data_volume(alpha, cfg))


def solve_p1_oracle(truth: BinaryMap, cfg: VolumeConfig) -> Selection:
    """Closed-form optimum of the known-truth problem: send the changed pixels."""
    return build_selection(truth, cfg)


def brute_force_p1(
    truth: BinaryMap,
    energy_eval: Callable[[BinaryMap], float],
    cfg: VolumeConfig,
) -> Selection:
    """Enumerate every alpha >= truth and keep the cheapest.

    Ties go to fewer selected pixels, then to the lexicographically smallest
    row-major alpha. Test oracle only; limited to 16 pixels.
    """
    h, w = truth.shape
    if h * w > BRUTE_FORCE_MAX_PIXELS:
        raise DataError(f"brute force limited to {BRUTE_FORCE_MAX_PIXELS} pixels, got {h * w}")
    base = truth.values.ravel().astype(np.uint8)
    free = np.flatnonzero(base == 0)
    best_key = None
    best = None
    # itertools.product over (0, 1) yields candidates in lexicographic order
    for bits in itertools.product((0, 1), repeat=free.size):
        cand = base.copy()
        cand[free] = bits
        alpha = BinaryMap.trusted(cand.reshape(h, w))
        e = energy_eval(alpha)
        if best_key is not None and e > best_key[0]:
            continue
        key = (e, int(cand.sum()), tuple(cand.tolist()))
        if best_key is None or key < best_key:
            best_key, best = key, alpha
    return Selection(BinaryMap(best.values), data_volume(best, cfg))


def store_selection(sel: Selection, cfg: VolumeConfig, path) -> None:
    """Write alpha as a binary map plus a ``<stem>.selection.json`` sidecar."""
    stem = stem_of(path)
    store_binary_map(sel.alpha, stem)
    sidecar = {
        "volume_bits": sel.volume_bits,
        "overhead_mode": cfg.coordinate_overhead,
        "D": cfg.bands_per_pixel,
        "b": cfg.bits_per_sample,
    }
    atomic_write_text(stem.with_name(stem.name + ".selection.json"), json.dumps(sidecar, indent=2) + "\n")


def load_selection(path) -> tuple[Selection, VolumeConfig]:
    stem = stem_of(path)
    side = stem.with_name(stem.name + ".selection.json")
    if not side.is_file():
        raise DataError(f"missing selection sidecar {side}")
    meta = json.loads(side.read_text())
    cfg = VolumeConfig(int(meta["D"]), int(meta["b"]), meta["overhead_mode"])
    alpha = load_binary_map(stem)
    vol = data_volume(alpha, cfg)
    if vol != int(meta["volume_bits"]):
        raise DataError(f"sidecar volume {meta['volume_bits']} disagrees with map ({vol} bits)")
    return Selection(alpha, vol), cfg

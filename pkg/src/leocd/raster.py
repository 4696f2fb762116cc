"""Raster containers, the header+payload file format, and pixel-grid helpers.

Every raster on disk is a pair of files sharing a stem: ``<stem>.json``
holds the header and ``<stem>.bin`` the raw little-endian payload, stored
band-plane by band-plane, each plane row-major.
"""

from __future__ import annotations

import json
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DataError

DTYPES = {
    "u16le": np.dtype("<u2"),
    "f32le": np.dtype("<f4"),
    "u8": np.dtype("u1"),
}

DEFAULT_BIT_DEPTH = 12


@dataclass
class BandStack:
    """An H x W x bands multi-spectral raster.

    ``samples`` is held as a float64 array shaped ``(bands, height, width)``,
    which is the same plane order used on disk.
    """

    samples: np.ndarray
    band_labels: list[str]
    bit_depth: int = DEFAULT_BIT_DEPTH

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise DataError(f"band stack must be (bands, H, W) with positive sizes, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DataError("band stack contains non-finite samples")
        self.band_labels = [str(b) for b in self.band_labels]
        if len(self.band_labels) != arr.shape[0]:
            raise DataError(
                f"{len(self.band_labels)} band labels for {arr.shape[0]} bands"
            )
        if self.bit_depth < 1:
            raise DataError("bit_depth must be positive")
        self.samples = arr

    @property
    def bands(self) -> int:
        return self.samples.shape[0]

    @property
    def height(self) -> int:
        return self.samples.shape[1]

    @property
    def width(self) -> int:
        return self.samples.shape[2]

    @property
    def geometry(self) -> tuple[int, int, int]:
        return self.height, self.width, self.bands

    def pixel(self, i: int, j: int) -> np.ndarray:
        return self.samples[:, i, j].copy()

    def replace(self, samples: np.ndarray, band_labels: Sequence[str] | None = None) -> "BandStack":
        labels = self.band_labels if band_labels is None else list(band_labels)
        return BandStack(samples, labels, self.bit_depth)


@dataclass
class BinaryMap:
    """H x W raster of {0, 1}."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values)
        if arr.ndim != 2 or min(arr.shape) < 1:
            raise DataError(f"binary map must be 2-D with positive sizes, got {arr.shape}")
        if arr.dtype == bool:
            arr = arr.astype(np.uint8)
        if not np.all((arr == 0) | (arr == 1)):
            raise DataError("binary map values must be 0 or 1")
        self.values = arr.astype(np.uint8)

    @classmethod
    def trusted(cls, values: np.ndarray) -> "BinaryMap":
        """Wrap a uint8 array already known to hold only 0/1, skipping checks."""
        obj = cls.__new__(cls)
        obj.values = values
        return obj

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def count(self) -> int:
        return int(self.values.sum(dtype=np.int64))

    def as_bool(self) -> np.ndarray:
        return self.values.astype(bool)


@dataclass
class ScoreMap:
    """H x W raster of probabilities in the closed interval [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2 or min(arr.shape) < 1:
            raise DataError(f"score map must be 2-D with positive sizes, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DataError("score map contains non-finite values")
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise DataError(
                f"score map values must lie in [0, 1] (found range {arr.min()}..{arr.max()})"
            )
        # folds -0.0 into +0.0
        self.values = arr + 0.0

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


# ---------------------------------------------------------------------------
# file I/O


def stem_of(path: str | os.PathLike) -> Path:
    p = Path(path)
    if p.suffix in (".json", ".bin"):
        p = p.with_suffix("")
    return p


def _sibling(stem: Path, suffix: str) -> Path:
    # append rather than with_suffix, so stems like "scene.v2" keep their dot
    return stem.with_name(stem.name + suffix)


def atomic_write_bytes(path: str | os.PathLike, data: bytes) -> None:
    """Write ``data`` to a temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def _write_raster(stem: Path, planes: np.ndarray, dtype: str, labels: list[str], bit_depth: int) -> None:
    header = {
        "height": int(planes.shape[1]),
        "width": int(planes.shape[2]),
        "bands": int(planes.shape[0]),
        "dtype": dtype,
        "band_labels": list(labels),
        "bit_depth": int(bit_depth),
    }
    payload = np.ascontiguousarray(planes.astype(DTYPES[dtype])).tobytes()
    atomic_write_bytes(_sibling(stem, ".bin"), payload)
    atomic_write_text(_sibling(stem, ".json"), json.dumps(header, indent=2) + "\n")


def _read_raster(path: str | os.PathLike) -> tuple[dict, np.ndarray]:
    stem = stem_of(path)
    hdr_path, bin_path = _sibling(stem, ".json"), _sibling(stem, ".bin")
    for p in (hdr_path, bin_path):
        if not p.is_file():
            raise DataError(f"missing raster file: {p}")
    try:
        header = json.loads(hdr_path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed raster header {hdr_path}: {exc}") from None
    for key in ("height", "width", "bands", "dtype"):
        if key not in header:
            raise DataError(f"raster header {hdr_path} lacks '{key}'")
    dtype = header["dtype"]
    if dtype not in DTYPES:
        raise DataError(f"unsupported dtype {dtype!r} in {hdr_path}")
    h, w, b = (int(header[k]) for k in ("height", "width", "bands"))
    if min(h, w, b) < 1:
        raise DataError(f"non-positive dimensions in {hdr_path}")
    raw = bin_path.read_bytes()
    expected = h * w * b * DTYPES[dtype].itemsize
    if len(raw) != expected:
        raise DataError(
            f"payload {bin_path} holds {len(raw)} bytes, header implies {expected}"
        )
    planes = np.frombuffer(raw, dtype=DTYPES[dtype]).reshape(b, h, w)
    return header, planes


def store_band_stack(stack: BandStack, path: str | os.PathLike, dtype: str = "f32le") -> None:
    if dtype not in ("u16le", "f32le"):
        raise DataError(f"band stacks are stored as u16le or f32le, not {dtype!r}")
    s = stack.samples
    if dtype == "u16le":
        if np.any(s < 0) or np.any(s > 65535) or np.any(s != np.round(s)):
            raise DataError("u16le storage needs integer samples in [0, 65535]")
    else:
        if np.any(np.abs(s) > np.finfo(np.float32).max):
            raise DataError("samples overflow float32")
    _write_raster(stem_of(path), s, dtype, stack.band_labels, stack.bit_depth)


def load_band_stack(path: str | os.PathLike) -> BandStack:
    header, planes = _read_raster(path)
    if header["dtype"] not in ("u16le", "f32le"):
        raise DataError(f"band stack dtype must be u16le or f32le, got {header['dtype']!r}")
    labels = header.get("band_labels") or [f"b{k}" for k in range(planes.shape[0])]
    return BandStack(planes.astype(np.float64), labels, int(header.get("bit_depth", DEFAULT_BIT_DEPTH)))


def store_binary_map(bmap: BinaryMap, path: str | os.PathLike) -> None:
    _write_raster(stem_of(path), bmap.values[None], "u8", ["mask"], 1)


def load_binary_map(path: str | os.PathLike, expected_shape: tuple[int, int] | None = None) -> BinaryMap:
    header, planes = _read_raster(path)
    if header["bands"] != 1:
        raise DataError(f"binary map must have 1 band, got {header['bands']}")
    if header["dtype"] != "u8":
        raise DataError(f"binary map dtype must be u8, got {header['dtype']!r}")
    bmap = BinaryMap(planes[0].copy())
    _check_shape(bmap.shape, expected_shape, path)
    return bmap


def store_score_map(smap: ScoreMap, path: str | os.PathLike) -> None:
    _write_raster(stem_of(path), smap.values[None], "f32le", ["score"], 32)


def load_score_map(path: str | os.PathLike, expected_shape: tuple[int, int] | None = None) -> ScoreMap:
    """Read a single-band f32le probability map, checking range and geometry."""
    header, planes = _read_raster(path)
    if header["bands"] != 1:
        raise DataError(f"score map must have 1 band, got {header['bands']}")
    if header["dtype"] != "f32le":
        raise DataError(f"score map dtype must be f32le, got {header['dtype']!r}")
    smap = ScoreMap(planes[0].astype(np.float64))
    _check_shape(smap.shape, expected_shape, path)
    return smap


def _check_shape(shape, expected, path) -> None:
    if expected is not None and tuple(shape) != tuple(expected):
        raise DataError(f"{path}: geometry {tuple(shape)} does not match expected {tuple(expected)}")


# ---------------------------------------------------------------------------
# band handling


def select_bands(stack: BandStack, labels: Sequence[str]) -> BandStack:
    labels = list(labels)
    if not labels:
        raise DataError("no bands requested")
    if len(set(labels)) != len(labels):
        raise DataError(f"duplicate band request in {labels}")
    index = []
    for lab in labels:
        hits = [k for k, have in enumerate(stack.band_labels) if have == lab]
        if len(hits) != 1:
            raise DataError(
                f"band {lab!r} not found exactly once in {stack.band_labels}"
            )
        index.append(hits[0])
    return stack.replace(stack.samples[index].copy(), labels)


def zscore_normalize(stack: BandStack) -> BandStack:
    """Standardize each band to zero mean and unit population std.

    Statistics are taken over the whole image, band by band.
    """
    s = stack.samples
    flat = s.reshape(s.shape[0], -1)
    mu = flat.mean(axis=1)
    sigma = flat.std(axis=1)
    for k in range(s.shape[0]):
        if sigma[k] == 0.0 or np.all(flat[k] == flat[k, 0]):
            raise DataError(f"band {stack.band_labels[k]!r} is constant; cannot normalize")
    out = (s - mu[:, None, None]) / sigma[:, None, None]
    return stack.replace(out)


# ---------------------------------------------------------------------------
# tiling


def tile_origins(height: int, width: int, tile_h: int, tile_w: int) -> list[tuple[int, int, int, int]]:
    """Row-major ``(row0, col0, rows, cols)`` for a truncating partition."""
    if tile_h < 1 or tile_w < 1:
        raise DataError(f"tile size must be positive, got {tile_h}x{tile_w}")
    return [
        (r, c, min(tile_h, height - r), min(tile_w, width - c))
        for r in range(0, height, tile_h)
        for c in range(0, width, tile_w)
    ]


def tile(stack: BandStack, tile_h: int, tile_w: int) -> list[tuple[int, int, BandStack]]:
    """Split into non-overlapping tiles; edge tiles are truncated, not padded."""
    if tile_h > stack.height or tile_w > stack.width:
        raise DataError(
            f"tile {tile_h}x{tile_w} larger than image {stack.height}x{stack.width}"
        )
    return [
        (r, c, stack.replace(stack.samples[:, r:r + h, c:c + w].copy()))
        for r, c, h, w in tile_origins(stack.height, stack.width, tile_h, tile_w)
    ]


def stitch(tiles: Iterable[tuple[int, int, BandStack]], height: int, width: int) -> BandStack:
    tiles = list(tiles)
    if not tiles:
        raise DataError("nothing to stitch")
    first = tiles[0][2]
    out = np.zeros((first.bands, height, width))
    for r, c, t in tiles:
        out[:, r:r + t.height, c:c + t.width] = t.samples
    return first.replace(out)


def tile_map(
    func: Callable[..., np.ndarray],
    arrays: Sequence[np.ndarray],
    tile_shape: tuple[int, int] = (256, 256),
    workers: int = 1,
) -> np.ndarray:
    """Apply a per-pixel ``func`` tile by tile and stitch the (H, W) result.

    Each array is indexed on its last two axes. ``func`` must be pixelwise,
    so the stitched output does not depend on tile size or worker count.
    """
    h, w = arrays[0].shape[-2:]
    boxes = tile_origins(h, w, *tile_shape)

    def run(box):
        r, c, th, tw = box
        return func(*(a[..., r:r + th, c:c + tw] for a in arrays))

    if workers > 1 and len(boxes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, boxes))
    else:
        parts = [run(b) for b in boxes]
    out = np.empty((h, w), dtype=np.float64)
    for (r, c, th, tw), part in zip(boxes, parts):
        out[r:r + th, c:c + tw] = part
    return out


# ---------------------------------------------------------------------------
# gateway side


def reconstruct(
    reference: BandStack,
    transmitted: Sequence[tuple[int, int, Sequence[float]]],
    geometry: tuple[int, int, int] | None = None,
) -> BandStack:
    """Overwrite received pixel vectors onto the reference image."""
    if geometry is not None and tuple(geometry) != reference.geometry:
        raise DataError(f"reference geometry {reference.geometry} != expected {tuple(geometry)}")
    out = reference.samples.copy()
    h, w, d = reference.geometry
    for i, j, vec in transmitted:
        if not (0 <= i < h and 0 <= j < w):
            raise DataError(f"transmitted coordinate ({i}, {j}) outside {h}x{w}")
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (d,):
            raise DataError(f"pixel vector at ({i}, {j}) has length {vec.size}, expected {d}")
        out[:, i, j] = vec
    return reference.replace(out)


def transmission_set(observed: BandStack, alpha: BinaryMap) -> list[tuple[int, int, np.ndarray]]:
    """The selected pixels of ``observed`` with their coordinates, row-major."""
    if alpha.shape != (observed.height, observed.width):
        raise DataError(f"selection {alpha.shape} does not match image {observed.height}x{observed.width}")
    rows, cols = np.nonzero(alpha.values)
    return [(int(i), int(j), observed.samples[:, i, j].copy()) for i, j in zip(rows, cols)]

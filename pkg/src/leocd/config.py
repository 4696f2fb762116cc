"""Pipeline configuration: one JSON document, every field optional.

An empty document runs the default simulation regime (20 GHz / 500 MHz
link, 786 km orbit, 1.8 GHz CPU, epsilon = 0.05) on a synthetic scene.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .changescore import ScorerConfig
from .cloudmask import CloudConfig
from .energy import EnergyConfig
from .errors import ConfigError
from .linksim import LinkConfig, PassConfig
from .synthetic import SyntheticSpec

TX_POLICIES = ("start", "at_time", "stepped")


@dataclass
class InputPaths:
    reference: Optional[str] = None
    observed: Optional[str] = None
    change_truth: Optional[str] = None


@dataclass
class CalibrationOptions:
    epsilon: float = 0.05
    tau: Optional[float] = None
    calibration_fraction: float = 0.5
    split_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 1.0:
            raise ConfigError(f"epsilon must be in [0, 1), got {self.epsilon}")
        if self.tau is not None and not 0.0 <= self.tau <= 1.0:
            raise ConfigError(f"tau must be in [0, 1], got {self.tau}")
        if not 0.0 < self.calibration_fraction <= 1.0:
            raise ConfigError("calibration_fraction must be in (0, 1]")


@dataclass
class VolumeOptions:
    """Unset fields fall back to the observed stack (band count, bit depth)."""

    bands_per_pixel: Optional[int] = None
    bits_per_sample: Optional[int] = None
    coordinate_overhead: str = "none"


@dataclass
class TransmissionOptions:
    policy: str = "start"
    t_s: float = 0.0
    dt_s: float = 1.0

    def __post_init__(self):
        if self.policy not in TX_POLICIES:
            raise ConfigError(f"transmission policy must be one of {TX_POLICIES}, got {self.policy!r}")


@dataclass
class MetricsOptions:
    n_bins: int = 20
    psnr_max_value: Optional[float] = None


@dataclass
class PipelineConfig:
    inputs: InputPaths = field(default_factory=InputPaths)
    synthetic: Optional[SyntheticSpec] = None
    cloud_bands: list = field(default_factory=lambda: ["R", "G", "B", "Nir"])
    change_bands: list = field(default_factory=lambda: ["R", "G", "B"])
    cloud: CloudConfig = field(default_factory=CloudConfig)
    scorer: ScorerConfig = field(default_factory=ScorerConfig)
    calibration: CalibrationOptions = field(default_factory=CalibrationOptions)
    volume: VolumeOptions = field(default_factory=VolumeOptions)
    pass_: PassConfig = field(default_factory=PassConfig)
    link: LinkConfig = field(default_factory=LinkConfig)
    modcod: Optional[str] = None
    energy: EnergyConfig = field(default_factory=EnergyConfig)
    transmission: TransmissionOptions = field(default_factory=TransmissionOptions)
    metrics: MetricsOptions = field(default_factory=MetricsOptions)
    figures: bool = True
    workers: int = 1
    tile_size: list = field(default_factory=lambda: [256, 256])
    output_dir: str = "out"

    def __post_init__(self):
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if len(self.tile_size) != 2 or min(self.tile_size) < 1:
            raise ConfigError("tile_size must be two positive integers")
        have_paths = self.inputs.reference is not None or self.inputs.observed is not None
        if have_paths and self.synthetic is not None:
            raise ConfigError("give either input paths or a synthetic block, not both")
        if have_paths and (self.inputs.reference is None or self.inputs.observed is None):
            raise ConfigError("both reference and observed paths are required")
        if not have_paths and self.synthetic is None:
            self.synthetic = SyntheticSpec()

    def to_dict(self) -> dict:
        """Plain-data form, without runtime-only knobs (workers, output_dir)."""
        d = dataclasses.asdict(self)
        d["pass"] = d.pop("pass_")
        for k in ("workers", "output_dir"):
            d.pop(k)
        return d


_NESTED = {
    "inputs": InputPaths,
    "synthetic": SyntheticSpec,
    "cloud": CloudConfig,
    "scorer": ScorerConfig,
    "calibration": CalibrationOptions,
    "volume": VolumeOptions,
    "pass_": PassConfig,
    "link": LinkConfig,
    "energy": EnergyConfig,
    "transmission": TransmissionOptions,
    "metrics": MetricsOptions,
}


def _build(cls, data: Any, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def config_from_dict(data: dict, base_dir: Path | None = None) -> PipelineConfig:
    """Build a PipelineConfig; relative file paths resolve against ``base_dir``."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    data = dict(data)
    if "pass" in data:
        data["pass_"] = data.pop("pass")
    kwargs = {}
    for key, value in data.items():
        if key in _NESTED and value is not None:
            kwargs[key] = _build(_NESTED[key], value, key)
        else:
            kwargs[key] = value
    cfg = _build(PipelineConfig, kwargs, "config")
    if base_dir is not None:
        _resolve_paths(cfg, Path(base_dir))
    return cfg


def _resolve(p: str | None, base: Path) -> str | None:
    if p is None:
        return None
    q = Path(p)
    return str(q if q.is_absolute() else base / q)


def _resolve_paths(cfg: PipelineConfig, base: Path) -> None:
    for name in ("reference", "observed", "change_truth"):
        setattr(cfg.inputs, name, _resolve(getattr(cfg.inputs, name), base))
    cfg.cloud.external_path = _resolve(cfg.cloud.external_path, base)
    cfg.scorer.external_path = _resolve(cfg.scorer.external_path, base)
    cfg.modcod = _resolve(cfg.modcod, base)


def load_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return config_from_dict(data, path.parent)

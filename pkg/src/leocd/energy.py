"""On-board energy for compressing and downlinking the selected pixels."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError
from .raster import BinaryMap
from .selection import Selection, VolumeConfig, data_volume


@dataclass
class EnergyConfig:
    """CPU and compression parameters.

    ``n_cpu`` is carried for reporting only: power and throughput both scale
    with the core count, so energy per bit does not depend on it.
    """

    f_cpu_hz: float = 1.8e9
    p_proc_w: float = 10.0
    kappa: float = 0.1
    rho: float = 5.0
    n_cpu: int = 1
    compress_before_transmit: bool = False

    def __post_init__(self):
        if not self.f_cpu_hz > 0:
            raise ConfigError("f_cpu_hz must be positive")
        if self.p_proc_w < 0:
            raise ConfigError("p_proc_w must be non-negative")
        if self.rho < 1:
            raise ConfigError("compression ratio rho must be >= 1")
        if not self.kappa > 0:
            raise ConfigError("kappa must be positive")
        if self.n_cpu < 1:
            raise ConfigError("n_cpu must be >= 1")


@dataclass(frozen=True)
class EnergyReport:
    volume_bits: int
    transmit_bits: float
    rate_bps: float
    modcod_name: str | None
    e_proc_j: float
    e_trans_j: float
    e_total_j: float
    baseline_total_j: float
    savings_fraction: float

    def to_dict(self) -> dict:
        return asdict(self)


def cycle_energy(cfg: EnergyConfig) -> float:
    """Joules per CPU cycle at the configured clock."""
    return cfg.p_proc_w / cfg.f_cpu_hz


def compression_complexity(cfg: EnergyConfig) -> float:
    """CPU cycles needed to compress one bit at ratio rho."""
    return math.exp(cfg.kappa * cfg.rho) - math.exp(cfg.kappa)


def processing_energy(volume_bits: float, cfg: EnergyConfig) -> float:
    if volume_bits < 0:
        raise ConfigError("volume must be non-negative")
    return volume_bits * compression_complexity(cfg) * cycle_energy(cfg)


def transmit_bits(volume_bits: float, cfg: EnergyConfig) -> float:
    return volume_bits / cfg.rho if cfg.compress_before_transmit else float(volume_bits)


def transmission_energy(volume_bits: float, rate_bps: float, cfg: EnergyConfig,
                        p_tx_w: float = 10.0) -> float:
    """Radiated energy to push the (optionally compressed) bits at ``rate_bps``."""
    if not rate_bps > 0:
        raise ConfigError(f"rate must be positive, got {rate_bps}; handle outage upstream")
    if volume_bits < 0:
        raise ConfigError("volume must be non-negative")
    return p_tx_w * transmit_bits(volume_bits, cfg) / rate_bps


def _energy_pair(volume_bits, rate_bps, cfg, p_tx_w):
    return processing_energy(volume_bits, cfg), transmission_energy(volume_bits, rate_bps, cfg, p_tx_w)


def total_energy(
    selection: Selection,
    rate_bps: float,
    cfg: EnergyConfig,
    volume_cfg: VolumeConfig,
    p_tx_w: float = 10.0,
    modcod_name: str | None = None,
) -> EnergyReport:
    """Processing plus transmission energy, against sending every pixel.

    The baseline uses the same rate and volume settings with all pixels
    selected, so ``savings_fraction`` isolates the effect of the selection.
    """
    e_proc, e_trans = _energy_pair(selection.volume_bits, rate_bps, cfg, p_tx_w)
    full = BinaryMap(np.ones(selection.alpha.shape, dtype=np.uint8))
    b_proc, b_trans = _energy_pair(data_volume(full, volume_cfg), rate_bps, cfg, p_tx_w)
    e_tot = e_proc + e_trans
    base = b_proc + b_trans
    savings = 1.0 - e_tot / base if base > 0 else 0.0
    return EnergyReport(
        volume_bits=selection.volume_bits,
        transmit_bits=transmit_bits(selection.volume_bits, cfg),
        rate_bps=rate_bps,
        modcod_name=modcod_name,
        e_proc_j=e_proc,
        e_trans_j=e_trans,
        e_total_j=e_tot,
        baseline_total_j=base,
        savings_fraction=savings,
    )


def selection_energy_fn(rate_bps: float, cfg: EnergyConfig, volume_cfg: VolumeConfig,
                        p_tx_w: float = 10.0):
    """alpha -> total joules, for plugging into the brute-force search."""

    def energy(alpha: BinaryMap) -> float:
        vol = data_volume(alpha, volume_cfg)
        e_proc, e_trans = _energy_pair(vol, rate_bps, cfg, p_tx_w)
        return e_proc + e_trans

    return energy

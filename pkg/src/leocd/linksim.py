"""Downlink geometry and adaptive coding for a single LEO pass.

The pass model is deliberately plain: circular orbit, non-rotating Earth,
and a gateway directly under the ground track, so the satellite crosses
zenith at mid-pass and the Earth-central angle grows linearly in time away
from it. The pass length itself defines where coverage starts and ends.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import NamedTuple

from .errors import ConfigError, DataError, LinkOutageError

log = logging.getLogger(__name__)

SPEED_OF_LIGHT = 2.998e8
MODCOD_HEADER = ["name", "spectral_efficiency_bps_per_hz", "gamma_min_db"]


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


@dataclass
class PassConfig:
    altitude_m: float = 786e3
    orbital_period_s: float = 6000.0
    pass_duration_s: float = 900.0
    earth_radius_m: float = 6.371e6

    def __post_init__(self):
        if self.altitude_m <= 0 or self.earth_radius_m <= 0:
            raise ConfigError("altitude and earth radius must be positive")
        if not 0 < self.pass_duration_s < self.orbital_period_s:
            raise ConfigError("pass duration must be positive and shorter than the orbital period")


@dataclass
class LinkConfig:
    p_tx_w: float = 10.0
    g_tx_db: float = 32.13
    g_rx_db: float = 34.2
    f_c_hz: float = 20e9
    noise_power_db: float = -115.0
    bandwidth_hz: float = 500e6
    c_mps: float = SPEED_OF_LIGHT

    def __post_init__(self):
        vals = (self.p_tx_w, self.g_tx_db, self.g_rx_db, self.f_c_hz, self.noise_power_db)
        if not all(math.isfinite(v) for v in vals):
            raise ConfigError("link powers and gains must be finite")
        if self.p_tx_w <= 0 or self.f_c_hz <= 0:
            raise ConfigError("transmit power and carrier frequency must be positive")
        if not self.bandwidth_hz > 0:
            raise ConfigError("bandwidth must be positive")


@dataclass(frozen=True)
class Modcod:
    name: str
    spectral_efficiency: float
    gamma_min_db: float


@dataclass
class ModcodTable:
    """MODCODs sorted by threshold with strictly increasing efficiency.

    Under that ordering the best decodable entry is simply the last one whose
    threshold the SNR reaches.
    """

    entries: list[Modcod] = field(default_factory=list)

    def __post_init__(self):
        if not self.entries:
            raise DataError("MODCOD table is empty")
        for prev, cur in zip(self.entries, self.entries[1:]):
            if cur.gamma_min_db < prev.gamma_min_db:
                raise DataError(f"MODCOD table not sorted by gamma_min_db at {cur.name!r}")
            if cur.spectral_efficiency <= prev.spectral_efficiency:
                raise DataError(f"MODCOD {cur.name!r} is dominated by {prev.name!r}")

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    @property
    def names(self) -> list[str]:
        return [m.name for m in self.entries]

    @property
    def min_gamma_db(self) -> float:
        return self.entries[0].gamma_min_db


def _read_modcod_rows(fh, source: str) -> list[Modcod]:
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != MODCOD_HEADER:
        raise DataError(f"{source}: expected header {','.join(MODCOD_HEADER)}")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row or not "".join(row).strip():
            continue
        if len(row) != 3:
            raise DataError(f"{source}:{lineno}: expected 3 fields")
        try:
            eff, gmin = float(row[1]), float(row[2])
        except ValueError:
            raise DataError(f"{source}:{lineno}: non-numeric field") from None
        if not (math.isfinite(eff) and math.isfinite(gmin)) or eff <= 0:
            raise DataError(f"{source}:{lineno}: invalid efficiency/threshold")
        rows.append(Modcod(row[0].strip(), eff, gmin))
    return rows


def _frontier(rows: list[Modcod], source: str) -> ModcodTable:
    for prev, cur in zip(rows, rows[1:]):
        if cur.gamma_min_db < prev.gamma_min_db:
            raise DataError(f"{source}: rows not sorted ascending by gamma_min_db ({cur.name!r})")
    kept: list[Modcod] = []
    for m in rows:
        if kept and m.spectral_efficiency <= kept[-1].spectral_efficiency:
            log.debug("dropping dominated MODCOD %s (beaten by %s)", m.name, kept[-1].name)
            continue
        # equal threshold, higher efficiency: the earlier row is dominated
        while kept and kept[-1].gamma_min_db == m.gamma_min_db:
            kept.pop()
        kept.append(m)
    return ModcodTable(kept)


def load_modcod_table(path) -> ModcodTable:
    """Load a MODCOD CSV, rejecting rows dominated by a cheaper, faster entry."""
    try:
        with open(path, newline="") as fh:
            rows = _read_modcod_rows(fh, str(path))
    except FileNotFoundError:
        raise DataError(f"MODCOD table not found: {path}") from None
    return _frontier(rows, str(path))


def default_modcod_table() -> ModcodTable:
    """DVB-S2 normal-frame MODCODs, ideal Es/N0 on AWGN (EN 302 307-1)."""
    ref = resources.files("leocd") / "data" / "dvbs2_modcod.csv"
    with ref.open("r", newline="") as fh:
        rows = _read_modcod_rows(fh, "dvbs2_modcod.csv")
    return _frontier(rows, "dvbs2_modcod.csv")


# ---------------------------------------------------------------------------


def central_angle(pass_cfg: PassConfig, t: float) -> float:
    return 2.0 * math.pi / pass_cfg.orbital_period_s * abs(t - pass_cfg.pass_duration_s / 2.0)


def slant_range(pass_cfg: PassConfig, t: float) -> float:
    """Satellite-to-gateway distance in metres, t seconds into the pass."""
    if not 0.0 <= t <= pass_cfg.pass_duration_s:
        raise ConfigError(f"t={t} s lies outside the pass [0, {pass_cfg.pass_duration_s}]")
    re = pass_cfg.earth_radius_m
    rs = re + pass_cfg.altitude_m
    phi = central_angle(pass_cfg, t)
    # law of cosines rewritten as h^2 + 4 Re Rs sin^2(phi/2): no cancellation near zenith
    h = pass_cfg.altitude_m
    return math.sqrt(h * h + 4.0 * re * rs * math.sin(phi / 2.0) ** 2)


class Snr(NamedTuple):
    linear: float
    db: float


def snr(link: LinkConfig, d: float) -> Snr:
    """Free-space downlink SNR at range ``d`` metres."""
    if not d > 0:
        raise ConfigError(f"slant range must be positive, got {d}")
    path_gain = (link.c_mps / (4.0 * math.pi * d * link.f_c_hz)) ** 2
    gamma = (
        db_to_linear(link.g_tx_db)
        * db_to_linear(link.g_rx_db)
        * link.p_tx_w
        * path_gain
        / db_to_linear(link.noise_power_db)
    )
    return Snr(gamma, linear_to_db(gamma))


def select_modcod(table: ModcodTable, gamma_db: float) -> Modcod:
    best = None
    for m in table.entries:
        if gamma_db >= m.gamma_min_db:
            best = m
        else:
            break
    if best is None:
        raise LinkOutageError(
            f"SNR {gamma_db:.3f} dB is below the lowest MODCOD threshold {table.min_gamma_db} dB",
            gamma_db=gamma_db,
        )
    return best


def select_rate(table: ModcodTable, gamma_db: float, bandwidth_hz: float) -> tuple[float, str]:
    """Fastest decodable rate in bit/s and the MODCOD that gives it.

    Raises LinkOutageError when no entry can be decoded.
    """
    m = select_modcod(table, gamma_db)
    return m.spectral_efficiency * bandwidth_hz, m.name


@dataclass(frozen=True)
class LinkState:
    t_s: float
    slant_range_m: float
    snr_db: float
    rate_bps: float
    modcod: str


def link_state(pass_cfg: PassConfig, link: LinkConfig, table: ModcodTable, t: float) -> LinkState:
    d = slant_range(pass_cfg, t)
    g = snr(link, d)
    rate, name = select_rate(table, g.db, link.bandwidth_hz)
    return LinkState(t, d, g.db, rate, name)


@dataclass(frozen=True)
class SteppedTransmission:
    start_s: float
    end_s: float
    airtime_s: float
    bits: float
    steps: list[LinkState]

    @property
    def effective_rate_bps(self) -> float:
        return self.bits / self.airtime_s if self.airtime_s > 0 else 0.0


def stepped_transmission(
    bits: float,
    pass_cfg: PassConfig,
    link: LinkConfig,
    table: ModcodTable,
    t_start: float = 0.0,
    dt: float = 1.0,
) -> SteppedTransmission:
    """Send ``bits`` re-selecting the MODCOD every ``dt`` seconds.

    The rate over each step is the one chosen at the step's start. Steps in
    outage carry nothing and cost no airtime. Fails if the pass ends first.
    """
    if dt <= 0:
        raise ConfigError("time step must be positive")
    left = float(bits)
    t = t_start
    airtime = 0.0
    steps: list[LinkState] = []
    while left > 0:
        if t >= pass_cfg.pass_duration_s:
            raise LinkOutageError(
                f"pass ends with {left:.0f} bits still queued"
            )
        span = min(dt, pass_cfg.pass_duration_s - t)
        try:
            st = link_state(pass_cfg, link, table, t)
        except LinkOutageError:
            t += span
            continue
        steps.append(st)
        used = min(span, left / st.rate_bps)
        left -= used * st.rate_bps
        airtime += used
        t += used
        if left <= 1e-9 * max(bits, 1.0):
            break
    return SteppedTransmission(t_start, t, airtime, float(bits), steps)

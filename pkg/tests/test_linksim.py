import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from leocd.errors import ConfigError, DataError, LinkOutageError
from leocd.linksim import (
    LinkConfig,
    PassConfig,
    default_modcod_table,
    link_state,
    load_modcod_table,
    select_rate,
    slant_range,
    snr,
    stepped_transmission,
)

PASS = PassConfig()
LINK = LinkConfig()
TABLE = default_modcod_table()


def _geometric_range(pass_cfg, t):
    """Independent oracle: distance between position vectors in the orbit plane."""
    re = pass_cfg.earth_radius_m
    rs = re + pass_cfg.altitude_m
    phi = 2 * math.pi / pass_cfg.orbital_period_s * (t - pass_cfg.pass_duration_s / 2)
    sat = np.array([rs * math.sin(phi), rs * math.cos(phi)])
    gw = np.array([0.0, re])
    return float(np.linalg.norm(sat - gw))


def test_zenith_range_is_altitude():
    assert slant_range(PASS, 450.0) == pytest.approx(786e3, abs=1e-6)


def test_start_of_pass_range():
    # phi = 2*pi/6000 * 450 = 0.4712 rad
    d = slant_range(PASS, 0.0)
    assert d == pytest.approx(_geometric_range(PASS, 0.0), rel=1e-12)
    assert d == pytest.approx(3.249215e6, rel=1e-6)


def test_range_outside_pass():
    with pytest.raises(ConfigError):
        slant_range(PASS, -1.0)
    with pytest.raises(ConfigError):
        slant_range(PASS, 901.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 450))
def test_range_symmetric_and_monotone(dt):
    a = slant_range(PASS, 450 - dt)
    b = slant_range(PASS, 450 + dt)
    assert a == pytest.approx(b, rel=1e-12)
    assert a == pytest.approx(_geometric_range(PASS, 450 - dt), rel=1e-9)
    if dt > 1e-3:
        assert slant_range(PASS, 450 - dt) > slant_range(PASS, 450 - dt / 2)


def _fspl_db(d, f, c):
    return 20 * math.log10(4 * math.pi * d * f / c)


def test_snr_matches_db_budget():
    d = 786e3
    hand = 10 * math.log10(10) + 32.13 + 34.2 - _fspl_db(d, 20e9, 2.998e8) + 115
    g = snr(LINK, d)
    assert g.db == pytest.approx(hand, abs=1e-9)
    assert g.db == pytest.approx(14.9534, abs=1e-4)
    assert 10 * math.log10(g.linear) == pytest.approx(g.db)


def test_snr_inverse_square():
    a = snr(LINK, 1e6).db
    assert a - snr(LINK, 2e6).db == pytest.approx(20 * math.log10(2), abs=1e-9)


def test_snr_linear_in_power():
    hot = LinkConfig(p_tx_w=100.0)
    assert snr(hot, 1e6).db - snr(LINK, 1e6).db == pytest.approx(10.0, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.floats(1e5, 1e7), st.floats(1.0001, 3))
def test_snr_decreasing(d, k):
    assert snr(LINK, d * k).linear < snr(LINK, d).linear


def test_default_table_frontier():
    names = TABLE.names
    for dropped in ("QPSK 8/9", "8PSK 5/6", "8PSK 8/9", "8PSK 9/10", "16APSK 8/9", "16APSK 9/10"):
        assert dropped not in names
    effs = [m.spectral_efficiency for m in TABLE.entries]
    gms = [m.gamma_min_db for m in TABLE.entries]
    assert all(b > a for a, b in zip(effs, effs[1:]))
    assert gms == sorted(gms)
    assert len(TABLE.entries) == 22


def test_each_threshold_selects_its_entry():
    for m in TABLE.entries:
        rate, name = select_rate(TABLE, m.gamma_min_db, 5e8)
        assert name == m.name and rate == m.spectral_efficiency * 5e8


def test_rate_at_infinity_and_outage():
    assert select_rate(TABLE, math.inf, 1.0)[1] == "32APSK 9/10"
    with pytest.raises(LinkOutageError):
        select_rate(TABLE, -2.36, 5e8)


def test_default_rate_at_zenith():
    rate, name = select_rate(TABLE, snr(LINK, 786e3).db, 5e8)
    # highest entry with threshold <= 14.95 dB
    assert name == "32APSK 5/6"
    assert rate == pytest.approx(4.119540 * 5e8)


@settings(max_examples=100, deadline=None)
@given(st.floats(-2.35, 30), st.floats(0, 5))
def test_rate_nondecreasing_in_snr(g, bump):
    assert select_rate(TABLE, g + bump, 1.0)[0] >= select_rate(TABLE, g, 1.0)[0]


def test_worst_case_start_of_pass():
    start = link_state(PASS, LINK, TABLE, 0.0)
    assert start.modcod == "QPSK 3/5"
    for t in np.linspace(0, 900, 181):
        assert link_state(PASS, LINK, TABLE, float(t)).rate_bps >= start.rate_bps


def _csv(tmp_path, body):
    p = tmp_path / "m.csv"
    p.write_text("name,spectral_efficiency_bps_per_hz,gamma_min_db\n" + body)
    return p


def test_custom_table_drops_dominated(tmp_path):
    t = load_modcod_table(_csv(tmp_path, "a,1.0,0\nb,0.9,1\nc,2.0,2\n"))
    assert t.names == ["a", "c"]


def test_equal_threshold_keeps_faster(tmp_path):
    t = load_modcod_table(_csv(tmp_path, "a,1.0,0\nb,1.5,0\n"))
    assert t.names == ["b"]


@pytest.mark.parametrize("body", ["a,1.0,2\nb,2.0,1\n", "a,x,1\n", "a,1.0\n", "a,-1,0\n"])
def test_bad_tables(tmp_path, body):
    with pytest.raises(DataError):
        load_modcod_table(_csv(tmp_path, body))


def test_bad_header(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("n,e,g\na,1,0\n")
    with pytest.raises(DataError):
        load_modcod_table(p)


def test_stepped_transmission_small_payload():
    tx = stepped_transmission(1e6, PASS, LINK, TABLE)
    start = link_state(PASS, LINK, TABLE, 0.0)
    assert len(tx.steps) == 1
    assert tx.airtime_s == pytest.approx(1e6 / start.rate_bps)


def test_stepped_transmission_faster_than_worst_case():
    bits = 5e11
    tx = stepped_transmission(bits, PASS, LINK, TABLE, dt=1.0)
    worst = link_state(PASS, LINK, TABLE, 0.0).rate_bps
    assert tx.effective_rate_bps >= worst
    sent = 0.0
    for k, s in enumerate(tx.steps):
        sent += s.rate_bps * (1.0 if k < len(tx.steps) - 1 else 0.0)
    assert sent <= bits


def test_stepped_transmission_runs_out_of_pass():
    with pytest.raises(LinkOutageError):
        stepped_transmission(1e15, PASS, LINK, TABLE, dt=10.0)

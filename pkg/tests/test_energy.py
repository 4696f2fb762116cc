import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from leocd.energy import (
    EnergyConfig,
    compression_complexity,
    cycle_energy,
    processing_energy,
    selection_energy_fn,
    total_energy,
    transmission_energy,
)
from leocd.errors import ConfigError
from leocd.raster import BinaryMap
from leocd.selection import VolumeConfig, build_selection

CFG = EnergyConfig()


def test_cycle_energy():
    assert cycle_energy(CFG) == pytest.approx(10 / 1.8e9, rel=1e-15)
    assert cycle_energy(EnergyConfig(p_proc_w=0)) == 0
    assert cycle_energy(EnergyConfig(f_cpu_hz=3.6e9)) == pytest.approx(cycle_energy(CFG) / 2)


def test_compression_complexity():
    assert compression_complexity(CFG) == pytest.approx(math.exp(0.5) - math.exp(0.1), abs=1e-15)
    assert compression_complexity(CFG) == pytest.approx(0.5435504, abs=1e-7)
    assert compression_complexity(EnergyConfig(rho=1)) == 0


def test_processing_energy():
    expected = 1e9 * (math.exp(0.5) - math.exp(0.1)) * 10 / 1.8e9
    assert processing_energy(1e9, CFG) == pytest.approx(expected, rel=1e-12)
    assert processing_energy(1e9, CFG) == pytest.approx(3.019725, abs=1e-6)
    assert processing_energy(0, CFG) == 0


def test_transmission_energy():
    assert transmission_energy(1e9, 5e8, CFG, 10.0) == pytest.approx(20.0)
    assert transmission_energy(0, 5e8, CFG) == 0
    squeezed = EnergyConfig(compress_before_transmit=True)
    assert transmission_energy(1e9, 5e8, squeezed, 10.0) == pytest.approx(4.0)
    with pytest.raises(ConfigError):
        transmission_energy(1e9, 0.0, CFG)


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 1e10), st.floats(1e6, 1e10), st.floats(1.0001, 3))
def test_transmission_antitone_in_rate(v, r, k):
    assert transmission_energy(v, r * k, CFG) <= transmission_energy(v, r, CFG)
    assert processing_energy(v, CFG) == processing_energy(v, CFG)


def test_config_validation():
    for kw in ({"f_cpu_hz": 0}, {"p_proc_w": -1}, {"rho": 0.5}, {"kappa": 0}, {"n_cpu": 0}):
        with pytest.raises(ConfigError):
            EnergyConfig(**kw)


VOL = VolumeConfig(4, 12)


def _sel(mask):
    return build_selection(BinaryMap(np.asarray(mask)), VOL)


def test_empty_and_full_selection():
    empty = total_energy(_sel(np.zeros((4, 4))), 5e8, CFG, VOL)
    assert empty.e_total_j == 0 and empty.savings_fraction == 1.0
    full = total_energy(_sel(np.ones((4, 4))), 5e8, CFG, VOL)
    assert full.savings_fraction == 0.0
    assert full.e_total_j == full.e_proc_j + full.e_trans_j


def test_sixty_percent_saves_forty():
    mask = np.zeros(100)
    mask[:60] = 1
    rep = total_energy(_sel(mask.reshape(10, 10)), 5.94152e8, CFG, VOL)
    assert rep.savings_fraction == pytest.approx(0.4, abs=1e-12)
    assert rep.e_total_j == pytest.approx(0.6 * rep.baseline_total_j, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.booleans())
def test_savings_is_unselected_fraction(seed, squeeze):
    rng = np.random.default_rng(seed)
    mask = rng.random((6, 7)) < rng.random()
    cfg = EnergyConfig(compress_before_transmit=squeeze)
    rep = total_energy(_sel(mask), 1e8, cfg, VOL)
    assert rep.savings_fraction == pytest.approx(1 - mask.sum() / mask.size, abs=1e-12)
    assert 0 <= rep.savings_fraction <= 1


def test_energy_linear_and_monotone():
    f = selection_energy_fn(1e8, CFG, VOL)
    one = np.zeros((4, 4))
    one[0, 0] = 1
    three = one.copy()
    three[1, 1] = three[2, 2] = 1
    assert f(BinaryMap(three)) == pytest.approx(3 * f(BinaryMap(one)), rel=1e-12)
    assert f(BinaryMap(one)) < f(BinaryMap(three))


def test_report_dict():
    d = total_energy(_sel(np.ones((2, 2))), 1e8, CFG, VOL, modcod_name="QPSK 1/2").to_dict()
    assert d["modcod_name"] == "QPSK 1/2" and d["volume_bits"] == 4 * 4 * 12

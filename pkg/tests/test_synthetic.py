import numpy as np
import pytest

from leocd.errors import ConfigError
from leocd.synthetic import SyntheticSpec, band_labels, generate_synthetic


def test_no_change_no_noise():
    sc = generate_synthetic(SyntheticSpec(change_fraction=0, seed=5))
    assert np.array_equal(sc.observed.samples, sc.reference.samples)
    assert sc.change_truth.count == 0


def test_full_change():
    sc = generate_synthetic(SyntheticSpec(height=8, width=8, change_fraction=1.0))
    assert sc.change_truth.count == 64
    diff = np.abs(sc.observed.samples - sc.reference.samples)
    assert np.all((diff >= 300) & (diff <= 700))


def test_values_in_range_and_counts():
    spec = SyntheticSpec(height=20, width=10, change_fraction=0.25, cloud_fraction=0.1, seed=2)
    sc = generate_synthetic(spec)
    assert sc.change_truth.count == 50 and sc.cloud_truth.count == 20
    assert not np.any(sc.change_truth.as_bool() & sc.cloud_truth.as_bool())
    clear = ~sc.cloud_truth.as_bool()
    assert sc.observed.samples[:, clear].min() >= 500 and sc.observed.samples[:, clear].max() <= 2500
    assert np.all(sc.observed.samples[:, ~clear] == 4095)
    unchanged = clear & ~sc.change_truth.as_bool()
    assert np.array_equal(sc.observed.samples[:, unchanged], sc.reference.samples[:, unchanged])


def test_deterministic_and_seed_sensitive():
    spec = SyntheticSpec(height=16, width=16, noise_std=3.0, cloud_fraction=0.05, seed=9)
    a, b = generate_synthetic(spec), generate_synthetic(spec)
    assert a.observed.samples.tobytes() == b.observed.samples.tobytes()
    assert a.change_truth.values.tobytes() == b.change_truth.values.tobytes()
    c = generate_synthetic(SyntheticSpec(height=16, width=16, noise_std=3.0, cloud_fraction=0.05, seed=10))
    assert c.reference.samples.tobytes() != a.reference.samples.tobytes()


def test_documented_draw_order():
    spec = SyntheticSpec(height=3, width=4, bands=2, change_fraction=0.25, seed=7)
    rng = np.random.Generator(np.random.PCG64(7))
    ref = rng.integers(500, 2501, size=(2, 3, 4))
    perm = rng.permutation(12)
    sc = generate_synthetic(spec)
    assert np.array_equal(sc.reference.samples, ref)
    assert sorted(np.flatnonzero(sc.change_truth.values.ravel())) == sorted(perm[:3])


def test_labels():
    assert band_labels(6) == ["R", "G", "B", "Nir", "B5", "B6"]


@pytest.mark.parametrize("kw", [{"height": 0}, {"change_fraction": 1.5}, {"noise_std": -1},
                                {"change_fraction": 0.7, "cloud_fraction": 0.5}, {"seed": -1}])
def test_spec_validation(kw):
    with pytest.raises(ConfigError):
        SyntheticSpec(**kw)

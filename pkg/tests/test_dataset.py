import numpy as np
import pytest
from scipy import stats

from physpoof import dataset as dsm
from physpoof.waveform import subcarrier_spectrum


def test_build_is_deterministic_and_worker_independent(tmp_path):
    cfg = dsm.DatasetConfig(N=8, n1=16, snr_db=5.0)
    a = dsm.build(cfg, 200, 7, out_dir=tmp_path / "a")
    b = dsm.build(cfg, 200, 7, workers=2, out_dir=tmp_path / "b")
    for name in ("data.f32le", "labels.f32le", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert not np.array_equal(a.X, dsm.build(cfg, 200, 8).X)


def test_random_occupancy_is_binomial():
    cfg = dsm.DatasetConfig(N=16, n1=32, pattern="random")
    ds = dsm.build(cfg, 4000, 0)
    counts = ds.occupancy.sum(1).astype(int)
    observed = np.bincount(counts, minlength=17)
    expected = stats.binom.pmf(np.arange(17), 16, 0.5) * len(counts)
    # pool sparse tails so every cell expects at least five rows
    keep = expected >= 5
    obs = np.concatenate([observed[keep], [observed[~keep].sum()]])
    exp = np.concatenate([expected[keep], [expected[~keep].sum()]])
    assert stats.chisquare(obs, exp * obs.sum() / exp.sum()).pvalue > 0.01


def test_noiseless_rows_match_labels():
    cfg = dsm.DatasetConfig(N=8, n1=16, pattern="random", modulation="qam16")
    ds = dsm.build(cfg, 50, 1)
    mag = np.abs(subcarrier_spectrum(ds.X, 8))
    assert np.array_equal(mag > 1e-3, ds.occupancy.astype(bool))
    active = mag[ds.occupancy.astype(bool)]
    # power factor in [1, 2] times a 16-QAM magnitude in [sqrt(0.2), sqrt(1.8)]
    assert active.min() >= np.sqrt(0.2) - 1e-5 and active.max() <= 2 * np.sqrt(1.8) + 1e-5


def test_split_is_disjoint_and_exhaustive():
    ds = dsm.build(dsm.DatasetConfig(N=4, n1=8), 1000, 0)
    ds.X[:, 0] = np.arange(1000)
    train, test = dsm.split(ds, [0.8, 0.2], seed=3)
    assert len(train) == 800 and len(test) == 200
    ids = np.concatenate([train.X[:, 0], test.X[:, 0]])
    assert sorted(ids) == list(range(1000))
    with pytest.raises(ValueError):
        dsm.split(ds, [0.5, 0.6], 0)


@pytest.mark.parametrize("schema", ["occupancy", "class", "none"])
def test_save_load_round_trip(tmp_path, schema):
    cfg = dsm.DatasetConfig(N=6, n1=12, delta_f=[15e3, 30e3], snr_db=3.0, noise_fraction=0.3,
                            label_schema=schema)
    ds = dsm.build(cfg, 120, 5)
    back = dsm.load(dsm.save(ds, tmp_path / "d"))
    assert np.array_equal(back.X, ds.X)
    if ds.labels is None:
        assert back.labels is None
    else:
        assert np.array_equal(back.labels, ds.labels)
    assert back.config == ds.config and back.seed == 5


def test_schema_mismatch_is_rejected(tmp_path):
    ds = dsm.build(dsm.DatasetConfig(N=4, n1=8), 10, 0)
    out = dsm.save(ds, tmp_path / "d")
    man = (out / "manifest.json").read_text().replace('"schema_version": 1', '"schema_version": 99')
    (out / "manifest.json").write_text(man)
    with pytest.raises(dsm.SchemaError):
        dsm.load(out)
    with pytest.raises(dsm.SchemaError):
        dsm.load(tmp_path / "missing")


def test_noise_only_rows_have_no_signal_structure():
    cfg = dsm.DatasetConfig(N=8, n1=16, pattern="ofdm", power="unit", snr_db=40.0,
                            noise_fraction=0.5, label_schema="class")
    ds = dsm.build(cfg, 400, 2)
    energy = np.sum(ds.X.astype(float) ** 2, axis=1)
    assert 0.35 < ds.labels.mean() < 0.65
    assert energy[ds.labels == 0].max() < 0.01 * energy[ds.labels == 1].min()


def test_grid_labels_and_sampling():
    cfg = dsm.DatasetConfig(N=4, n1=16, delta_f=[15e3, 30e3, 45e3, 60e3])
    assert cfg.sampling_interval == pytest.approx(1 / (4 * 60e3))
    ds = dsm.build(cfg, 400, 0)
    assert set(np.unique(ds.delta_f_khz)) == {15.0, 30.0, 45.0, 60.0}
    assert np.all(ds.n_subcarriers == 4)


def test_fixed_power_is_shared_across_rows():
    cfg = dsm.DatasetConfig(N=4, n1=4, pattern="ofdm", modulation="bpsk", power="fixed", power_seed=9)
    mag = np.abs(subcarrier_spectrum(dsm.build(cfg, 20, 0).X, 4))
    assert np.allclose(mag, mag[0], atol=1e-5)


def test_config_validation():
    with pytest.raises(ValueError):
        dsm.DatasetConfig(N=0)
    with pytest.raises(ValueError):
        dsm.DatasetConfig(N=16, n1=8, delta_f=[15e3, 60e3], T_s=1e-4)
    with pytest.raises(ValueError):
        dsm.DatasetConfig(noise_fraction=0.2)
    with pytest.raises(ValueError):
        dsm.DatasetConfig(pattern="choice")
    with pytest.raises(ValueError):
        dsm.DatasetConfig.from_dict({"N": 4, "colour": "red"})
    with pytest.raises(ValueError):
        dsm.build(dsm.DatasetConfig(), 0, 0)


def test_choice_patterns():
    sets = [[1, 3, 6], [1, 4, 6], [1, 4, 7]]
    cfg = dsm.DatasetConfig(N=8, n1=16, pattern="choice", pattern_params={"patterns": sets})
    ds = dsm.build(cfg, 300, 0)
    rows = {tuple(np.flatnonzero(u)) for u in ds.occupancy}
    assert rows == {tuple(s) for s in sets}


def test_example1_classes_are_balanced():
    ds = dsm.build_example1(600, snr_db=5.0, seed=0)
    assert ds.X.shape == (600, 150)
    assert np.all(np.bincount(ds.labels.astype(int), minlength=3) > 150)

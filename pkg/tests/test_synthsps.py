import filecmp
import json
import os

import numpy as np
import pytest

from visuotactile import synthsps as S
from visuotactile.synthsps.dataset import generate_sample, sample_filename
from visuotactile.synthsps.generator import SPEC_CENTER_RANGE, draw_tactile


SMALL = dict(num_samples=12, image_size=12, num_views=5, sigma_meas=2.0)


def test_registry_order_and_categories():
    assert S.ACRONYMS == ("fRS", "fST", "uCO", "uRO", "mRG", "mCO", "mTX", "tCO", "tPR",
                          "cCM", "cDF", "cDP", "cRX", "cYD", "aTK")
    assert len(S.PROPERTIES) == 15
    assert {p.category for p in S.PROPERTIES} == {"friction", "texture", "thermal", "compliance", "adhesion"}
    assert all(p.description for p in S.PROPERTIES)


def test_sample_material_is_deterministic():
    cfg = S.preset("desk")
    a = S.sample_material(np.random.default_rng(5), cfg)
    b = S.sample_material(np.random.default_rng(5), cfg)
    assert np.array_equal(a.tactile, b.tactile)
    assert all(np.array_equal(getattr(a, f), getattr(b, f)) for f in vars(a))


def test_zero_macrotexture_gives_flat_macro_layer():
    t = np.full(15, 50.0)
    t[S.index_of("mTX")] = 0.0
    m = S.material_from_tactile(t, np.random.default_rng(0))
    assert m.macro_amplitude == 0.0


def test_monte_carlo_marginals():
    cfg = S.preset("desk")
    rng = np.random.default_rng(1)
    t = np.array([S.sample_material(rng, cfg).tactile for _ in range(1000)])
    assert t.min() >= 0 and t.max() <= 100
    # Beta marginal std <= 100/sqrt(12 * 1.5); 5 standard errors
    np.testing.assert_allclose(t.mean(axis=0), cfg.expected_means(), atol=4.0)


def test_spec_center_in_band():
    cfg = S.preset("desk")
    rng = np.random.default_rng(2)
    centers = [S.sample_material(rng, cfg).spec_center for _ in range(200)]
    assert SPEC_CENTER_RANGE[0] <= min(centers) and max(centers) <= SPEC_CENTER_RANGE[1]


def test_no_gain_means_no_view_dependence():
    m = S.sample_material(np.random.default_rng(3), S.preset("desk"))
    m.spec_gain = 0.0
    a = S.render_view(m, -45.0, size=16, pixel_noise=0.0)
    b = S.render_view(m, 45.0, size=16, pixel_noise=0.0)
    assert np.array_equal(a, b)
    noisy_a = S.render_view(m, -45.0, size=16, pixel_noise=0.02)
    noisy_b = S.render_view(m, 45.0, size=16, pixel_noise=0.02)
    assert not np.array_equal(noisy_a, noisy_b)
    assert np.abs(noisy_a - a).max() < 0.2


def test_specular_gaussian_ratio():
    m = S.sample_material(np.random.default_rng(4), S.preset("desk"))
    c, w = m.spec_center, m.spec_width
    for side in (-1, 1):
        ratio = m.specular_weight(c) / m.specular_weight(c + side * 2 * w)
        assert ratio == pytest.approx(np.e ** 2, rel=1e-12)


def test_mean_intensity_monotone_in_macro_amplitude():
    m = S.sample_material(np.random.default_rng(6), S.preset("desk"))
    means = []
    for amp in np.linspace(0.0, 0.25, 5):
        m.macro_amplitude = amp
        means.append(S.render_view(m, 0.0, size=32, pixel_noise=0.0).mean())
    assert all(b > a for a, b in zip(means, means[1:]))


def test_render_rejects_out_of_range_angle():
    m = S.sample_material(np.random.default_rng(0), S.preset("desk"))
    with pytest.raises(ValueError):
        S.render_view(m, 50.0)


def test_render_is_deterministic():
    m = S.sample_material(np.random.default_rng(0), S.preset("desk"))
    assert np.array_equal(S.render_view(m, 12.5), S.render_view(m, 12.5))


def test_measure_noise_free():
    t = np.linspace(0, 100, 15)
    rows = S.measure_tactile(t, np.random.default_rng(0), 0.0)
    assert rows.shape == (5, 15)
    assert np.all(rows == t)


def test_measure_noise_std():
    rng = np.random.default_rng(7)
    cfg = S.preset("desk")
    devs = []
    for _ in range(10_000):
        t = draw_tactile(rng, cfg)
        m = S.measure_tactile(t, rng, 2.0)
        keep = (t > 10) & (t < 90)
        devs.append((m - t)[:, keep].ravel())
    std = np.concatenate(devs).std()
    assert abs(std - 2.0) < 0.1


def test_measure_mean_converges():
    t = np.full(15, 40.0)
    m = S.measure_tactile(t, np.random.default_rng(8), 2.0, repeats=20_000)
    np.testing.assert_allclose(m.mean(axis=0), t, atol=0.1)


def test_view_angles_exact():
    for n in (2, 5, 20, 100):
        a = S.view_angles(n)
        assert a[0] == -45.0 and a[-1] == 45.0
        assert all(a[k] == -45 + 90 * k / (n - 1) for k in range(n))


@pytest.mark.parametrize("n,expected", [(400, (360, 40)), (10, (9, 1)), (15, (14, 1)), (99, (90, 9))])
def test_split_sizes(n, expected):
    train, val = S.split_ids(n, seed=3)
    assert (len(train), len(val)) == expected
    assert sorted(train + val) == list(range(n))


def test_generation_order_independent():
    cfg = S.GenConfig(**SMALL).validate()
    forward = [generate_sample(cfg, 9, i)[1] for i in range(4)]
    backward = [generate_sample(cfg, 9, i)[1] for i in reversed(range(4))][::-1]
    assert all(np.array_equal(a, b) for a, b in zip(forward, backward))


def test_config_validation():
    with pytest.raises(ValueError):
        S.GenConfig(num_views=1).validate()
    with pytest.raises(ValueError):
        S.GenConfig(image_size=2).validate()
    with pytest.raises(ValueError):
        S.generate_dataset(S.GenConfig(num_samples=5), 0, "/tmp/never-written")


def test_same_seed_byte_identical(tmp_path):
    cfg = S.GenConfig(**SMALL)
    a = S.generate_dataset(cfg, 11, tmp_path / "a")
    b = S.generate_dataset(cfg, 11, tmp_path / "b")
    names = sorted(os.listdir(a))
    assert names == sorted(os.listdir(b))
    match, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
    assert not mismatch and not errors


def test_round_trip_bit_identical(tmp_path):
    cfg = S.GenConfig(**SMALL)
    path = S.generate_dataset(cfg, 4, tmp_path / "ds")
    loaded = S.load_dataset(path).to_arrays()
    direct = S.generate_arrays(cfg, 4)
    assert np.array_equal(loaded.images, direct.images)
    assert np.array_equal(loaded.measurements, direct.measurements)
    assert np.array_equal(loaded.angles, direct.angles)
    assert list(loaded.train_ids) == list(direct.train_ids)


def test_manifest_contents(tmp_path):
    path = S.generate_dataset(S.GenConfig(**SMALL), 4, tmp_path / "ds")
    m = json.loads((path / "manifest.json").read_text())
    assert m["format_version"] == 1
    assert m["property_acronyms"] == list(S.ACRONYMS)
    assert m["views_per_sample"] == 5 and m["image_height"] == 12
    assert len(m["split"]["val"]) == 1


def test_loader_rejects_truncated_file(tmp_path):
    path = S.generate_dataset(S.GenConfig(**SMALL), 4, tmp_path / "ds")
    f = path / sample_filename(3)
    f.write_bytes(f.read_bytes()[:-10])
    ds = S.load_dataset(path)
    with pytest.raises(S.DatasetError, match="sample_0003"):
        ds[3]


def test_loader_rejects_bad_magic(tmp_path):
    path = S.generate_dataset(S.GenConfig(**SMALL), 4, tmp_path / "ds")
    f = path / sample_filename(0)
    f.write_bytes(b"XXXX" + f.read_bytes()[4:])
    with pytest.raises(S.DatasetError, match="magic"):
        S.load_dataset(path)[0]


def test_loader_rejects_empty_val_and_bad_version(tmp_path):
    path = S.generate_dataset(S.GenConfig(**SMALL), 4, tmp_path / "ds")
    mpath = path / "manifest.json"
    m = json.loads(mpath.read_text())
    m["split"]["train"] = m["split"]["train"] + m["split"]["val"]
    m["split"]["val"] = []
    mpath.write_text(json.dumps(m))
    with pytest.raises(S.DatasetError):
        S.load_dataset(path)
    m["format_version"] = 2
    mpath.write_text(json.dumps(m))
    with pytest.raises(S.DatasetError, match="format_version"):
        S.load_dataset(path)


def test_loader_rejects_dimension_mismatch(tmp_path):
    path = S.generate_dataset(S.GenConfig(**SMALL), 4, tmp_path / "ds")
    mpath = path / "manifest.json"
    m = json.loads(mpath.read_text())
    m["image_height"] = 13
    mpath.write_text(json.dumps(m))
    with pytest.raises(S.DatasetError, match="dimensions"):
        S.load_dataset(path)[0]


def _probe_features(images):
    # per-view channel means/stds + coarse 4x4 pooled nadir image
    s, n, h, w, _ = images.shape
    stats = np.concatenate([images.mean(axis=(2, 3)), images.std(axis=(2, 3))], axis=2).reshape(s, -1)
    mid = images[:, n // 2].reshape(s, 4, h // 4, 4, w // 4, 3).mean(axis=(2, 4)).reshape(s, -1)
    return np.concatenate([stats, mid], axis=1)


def _ridge_r2(x_tr, y_tr, x_va, y_va, lam=1.0):
    mu, sd = x_tr.mean(0), x_tr.std(0) + 1e-8
    a, b = (x_tr - mu) / sd, (x_va - mu) / sd
    w = np.linalg.solve(a.T @ a + lam * np.eye(a.shape[1]), a.T @ (y_tr - y_tr.mean()))
    pred = b @ w + y_tr.mean()
    return 1 - np.sum((y_va - pred) ** 2) / np.sum((y_va - y_tr.mean()) ** 2)


def test_adhesion_probe_is_uninformative():
    cfg = S.preset("desk", num_samples=400, image_size=16, num_views=8)
    ds = S.generate_arrays(cfg, 21)
    x = _probe_features(ds.images)
    y = ds.targets
    tr, va = np.arange(300), np.arange(300, 400)
    atk = S.index_of("aTK")
    assert _ridge_r2(x[tr], y[tr, atk], x[va], y[va, atk], lam=10.0) < 0.1
    # sanity: the same probe does see a coupled property
    mtx = S.index_of("tCO")
    assert _ridge_r2(x[tr], y[tr, mtx], x[va], y[va, mtx], lam=10.0) > 0.3

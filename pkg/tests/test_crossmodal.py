import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from visuotactile import gradcore as G
from visuotactile.crossmodal import (
    PCA,
    CheckpointError,
    CrossModalModel,
    LossWeights,
    Standardizer,
    TrainConfig,
    TrainedEstimator,
    build_pseudo_labels,
    discriminator_loss,
    embed_tactile,
    embed_visual,
    estimate,
    kmeans,
    load_checkpoint,
    loss_adversarial,
    loss_class,
    loss_emb,
    registry_of,
    save_checkpoint,
    total_loss,
    train_cross_modal,
    train_regression_baseline,
)
from visuotactile.synthsps import ArrayDataset, generate_arrays, index_of, preset, split_ids


@pytest.fixture(scope="module")
def model():
    return CrossModalModel(15, np.random.default_rng(0), latent_dim=8, num_classes=6, hidden=16,
                           channels=(4, 8), disc_channels=(4,), disc_feature_dim=6)


@pytest.fixture(scope="module")
def desk():
    return generate_arrays(preset("desk"), 0)


def _zero_last(mlp):
    mlp.layers[-1].weight.data[:] = 0
    mlp.layers[-1].bias.data[:] = 0


def _img(seed, size=16):
    return np.random.default_rng(seed).random((size, size, 3)).astype(np.float32)


# ---------------------------------------------------------------- embeddings

def test_zero_head_gives_zero_visual_embedding():
    m = CrossModalModel(15, np.random.default_rng(1), latent_dim=5)
    m.E_v.head.weight.data[:] = 0
    m.E_v.head.bias.data[:] = 0
    assert np.all(embed_visual(m, np.zeros((16, 16, 3))) == 0)


def test_visual_embedding_deterministic_and_distinct(model):
    a = embed_visual(model, _img(1))
    assert np.array_equal(a, embed_visual(model, _img(1)))
    assert not np.allclose(a, embed_visual(model, _img(2)))
    assert a.shape == (1, 8) and np.all(np.isfinite(a))


def test_visual_embedding_shape_error(model):
    with pytest.raises(G.ShapeError):
        embed_visual(model, np.zeros((16, 16)))


def test_tactile_embedding():
    m = CrossModalModel(15, np.random.default_rng(2), latent_dim=5)
    std = Standardizer(np.full(15, 50.0), np.full(15, 10.0))
    t1, t2 = np.full(15, 30.0), np.linspace(0, 100, 15)
    e1 = embed_tactile(m, t1, std)
    assert np.array_equal(e1, embed_tactile(m, t1, std))
    assert not np.allclose(e1, embed_tactile(m, t2, std))
    _zero_last(m.E_t)
    assert np.all(embed_tactile(m, t2, std) == 0)


@pytest.mark.parametrize("bad", [np.full(15, -1.0), np.full(15, 101.0), np.full(14, 50.0)])
def test_tactile_embedding_rejects_bad_input(model, bad):
    std = Standardizer(np.zeros(15), np.ones(15))
    with pytest.raises(ValueError):
        embed_tactile(model, bad, std)


def test_estimate_midpoint_and_range():
    m = CrossModalModel(15, np.random.default_rng(3), latent_dim=6)
    lat = np.random.default_rng(4).normal(0, 50, size=(10_000, 6))
    out = estimate(m, lat)
    assert out.min() >= 0 and out.max() <= 100
    _zero_last(m.G_t)
    assert np.allclose(estimate(m, lat[:3]), 50.0)


def test_estimate_rejects_wrong_latent(model):
    with pytest.raises(G.ShapeError):
        estimate(model, np.zeros((1, 3)))


# ---------------------------------------------------------------- losses

def test_loss_emb_closed_forms():
    assert loss_emb(np.array([1.0, 0.0]), np.array([0.0, 1.0])).item() == pytest.approx(2.0)
    v = np.array([0.3, -2.0, 5.0])
    assert loss_emb(v, v).item() == 0.0


def test_loss_emb_random_matches_direct():
    rng = np.random.default_rng(5)
    a, b = rng.normal(size=(6, 4)), rng.normal(size=(6, 4))
    expect = np.mean(np.sum((a - b) ** 2, axis=1))
    assert loss_emb(a, b).item() == pytest.approx(expect, rel=1e-6)
    assert loss_emb(b, a).item() == pytest.approx(loss_emb(a, b).item(), rel=1e-7)


def test_loss_emb_dim_mismatch():
    with pytest.raises(G.ShapeError):
        loss_emb(np.zeros(3), np.zeros(4))


def test_adversarial_half_probability():
    m = CrossModalModel(2, np.random.default_rng(6), latent_dim=4, disc_channels=(4,), disc_feature_dim=3)
    _zero_last(m.D)
    imgs = G.Tensor(np.random.default_rng(7).random((5, 8, 8, 3)))
    t = np.random.default_rng(8).normal(size=(5, 2))
    d_loss, g_loss = loss_adversarial(m, imgs, t, G.Tensor(t))
    assert d_loss.item() == pytest.approx(2 * math.log(2), rel=1e-6)
    # t_fake == t_real: the L2 term vanishes, leaving -log 0.5
    assert g_loss.item() == pytest.approx(math.log(2), rel=1e-5)


def test_adversarial_matches_formula(model):
    rng = np.random.default_rng(9)
    imgs = G.Tensor(rng.random((4, 16, 16, 3)))
    real, fake = rng.normal(size=(4, 15)), rng.normal(size=(4, 15))
    d_loss, g_loss = loss_adversarial(model, imgs, real, G.Tensor(fake))
    f = model.F_d(imgs).data.astype(np.float64)

    def disc(t):
        return np.clip(model.discriminate(G.Tensor(f), G.Tensor(t)).data.astype(np.float64), 1e-7, 1 - 1e-7)
    dr, df = disc(real), disc(fake)
    assert d_loss.item() == pytest.approx(np.mean(-np.log(dr)) + np.mean(-np.log(1 - df)), rel=1e-5)
    l2 = np.mean(np.linalg.norm(fake - real, axis=1))
    assert g_loss.item() == pytest.approx(np.mean(-np.log(df)) + l2, rel=1e-5)


def test_discriminator_loss_clamps():
    out = discriminator_loss(G.Tensor(np.array([0.0])), G.Tensor(np.array([1.0])))
    assert np.isfinite(out.item())
    assert out.item() == pytest.approx(-2 * math.log(1e-7), rel=1e-3)


def test_loss_class_uniform_and_margin():
    assert loss_class(G.Tensor(np.zeros((3, 6))), [0, 3, 5]).item() == pytest.approx(math.log(6), rel=1e-6)
    small = loss_class(G.Tensor(np.array([[2.0, 0, 0]])), [0]).item()
    big = loss_class(G.Tensor(np.array([[40.0, 0, 0]])), [0]).item()
    assert big < small and big < 1e-10


def test_loss_class_matches_formula():
    rng = np.random.default_rng(10)
    z = rng.normal(size=(5, 4))
    y = rng.integers(0, 4, size=5)
    lse = np.log(np.exp(z).sum(axis=1))
    expect = np.mean(lse - z[np.arange(5), y])
    assert loss_class(G.Tensor(z), y).item() == pytest.approx(expect, rel=1e-5)


@pytest.mark.parametrize("label", [-1, 6])
def test_loss_class_rejects_bad_label(label):
    with pytest.raises(ValueError):
        loss_class(G.Tensor(np.zeros((1, 6))), [label])


def test_total_loss_arithmetic():
    assert total_loss((1.0, 1.0, 1.0, 1.0), LossWeights(0.5, 0.5, 0.5)) == pytest.approx(2.5)
    assert total_loss((0.7, 3.0, 4.0, 5.0), LossWeights(0, 0, 0)) == 0.7
    rng = np.random.default_rng(11)
    for _ in range(20):
        p, w = rng.uniform(0, 5, 4), rng.uniform(0, 2, 3)
        expect = p[0] + w[0] * p[1] + w[1] * p[2] + w[2] * p[3]
        assert total_loss(tuple(p), LossWeights(*w)) == pytest.approx(expect, rel=1e-12)


def test_total_loss_rejects_non_finite():
    with pytest.raises(G.NumericError):
        total_loss((1.0, float("nan"), 0.0, 0.0), LossWeights())


def test_loss_weights_nonnegative():
    with pytest.raises(ValueError):
        LossWeights(-0.1, 0, 0)


# ---------------------------------------------------------------- pseudo-labels

def _blobs(seed, n=40, sep=10.0):
    rng = np.random.default_rng(seed)
    a = rng.normal(0, 1, size=(n, 5))
    b = rng.normal(0, 1, size=(n, 5)) + sep
    return np.vstack([a, b]), np.r_[np.zeros(n, int), np.ones(n, int)]


@pytest.mark.parametrize("seed", range(5))
def test_kmeans_recovers_blobs(seed):
    x, truth = _blobs(seed)
    res = kmeans(x, 2, seed=seed)
    agree = np.mean(res.labels == truth)
    assert agree in (0.0, 1.0)


def test_kmeans_single_cluster():
    x = np.random.default_rng(12).normal(size=(30, 3))
    res = kmeans(x, 1)
    assert np.all(res.labels == 0)
    assert np.allclose(res.centers[0], x.mean(axis=0))


def test_kmeans_rejects_large_k():
    with pytest.raises(ValueError):
        kmeans(np.zeros((3, 2)), 4)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 8), st.integers(10, 60))
def test_kmeans_inertia_non_increasing(seed, k, n):
    x = np.random.default_rng(seed).normal(size=(n, 3)) * np.random.default_rng(seed + 1).uniform(0.1, 5, 3)
    hist = kmeans(x, k, seed=seed).inertia_history
    assert all(b <= a * (1 + 1e-12) for a, b in zip(hist, hist[1:]))


def test_kmeans_duplicate_points_reseed():
    x = np.vstack([np.zeros((10, 2)), np.ones((2, 2))])
    res = kmeans(x, 3, seed=0)
    assert set(res.labels) <= {0, 1, 2}
    assert res.inertia >= 0


def test_pca_orthonormal_and_reconstruction():
    x = np.random.default_rng(13).normal(size=(50, 12)) @ np.random.default_rng(14).normal(size=(12, 12))
    errs = []
    for d in range(1, 13):
        p = PCA.fit(x, d)
        assert np.allclose(p.components @ p.components.T, np.eye(d), atol=1e-5)
        errs.append(np.sum((p.reconstruct(p.transform(x)) - x) ** 2))
    assert all(b <= a + 1e-8 for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-8


def test_pseudo_labels_order_invariant_and_complete():
    rng = np.random.default_rng(15)
    feats, tact = rng.normal(size=(60, 20)), rng.uniform(0, 100, size=(60, 15))
    labels, labeler, _ = build_pseudo_labels(feats, tact, d_pca=8, k=6, seed=3)
    assert labels.shape == (60,) and labels.min() >= 0 and labels.max() < 6
    perm = rng.permutation(60)
    labels2, _, _ = build_pseudo_labels(feats[perm], tact[perm], d_pca=8, k=6, seed=3)
    assert np.array_equal(labels2, labels[perm])
    assert np.array_equal(labeler.assign(feats, tact), labels)


def test_pseudo_labels_reject_small_dataset():
    with pytest.raises(ValueError):
        build_pseudo_labels(np.zeros((4, 3)), np.zeros((4, 15)), k=6)


# ---------------------------------------------------------------- checkpoint

def test_checkpoint_round_trip_and_corruption(tmp_path):
    t = {"a": np.arange(6, dtype=np.float32).reshape(2, 3), "meta.x": np.array([104.0, 105.0], dtype=np.float32)}
    path = save_checkpoint(tmp_path / "c.ckpt", t)
    back = load_checkpoint(path)
    assert set(back) == set(t) and np.array_equal(back["a"], t["a"])
    raw = path.read_bytes()
    (tmp_path / "bad.ckpt").write_bytes(b"XXXX" + raw[4:])
    (tmp_path / "short.ckpt").write_bytes(raw[:-3])
    for name in ("bad.ckpt", "short.ckpt", "missing.ckpt"):
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / name)


# ---------------------------------------------------------------- training

SMALL = dict(channels=(4, 8), hidden=16, latent_dim=8, k=3, d_pca=5)


def test_smoke_one_epoch_ten_samples(desk, tmp_path):
    ds = desk.subset(10, 4)
    est = train_cross_modal(ds, TrainConfig(epochs=1, **SMALL))
    assert len(est.history) == 1
    assert set(est.history[0]) >= {"est", "emb", "adv_d", "adv_g", "cls", "total"}
    path = est.save(tmp_path / "m.ckpt")
    back = TrainedEstimator.load(path)
    assert registry_of(load_checkpoint(path)) == ds.acronyms
    a, b = est.predict_dataset(ds, ds.val_ids), back.predict_dataset(ds, ds.val_ids)
    assert a.shape == (4, 15) and np.max(np.abs(a - b)) < 1e-6
    assert back.labeler is not None and back.labeler.k == 3


def test_regression_smoke_and_determinism(desk):
    ds = desk.subset(24, 6)
    cfg = TrainConfig(epochs=2, lr=1e-3, seed=4, **SMALL)
    a = train_regression_baseline(ds, cfg, [3])
    b = train_regression_baseline(ds, cfg, [3])
    for k, v in a.model.state_dict().items():
        assert np.array_equal(v, b.model.state_dict()[k])
    assert a.predict_dataset(ds, ds.val_ids).shape == (6, 1)


def test_cross_modal_determinism(desk):
    ds = desk.subset(24, 6)
    cfg = TrainConfig(epochs=2, lr=1e-3, seed=5, **SMALL)
    a, b = train_cross_modal(ds, cfg, [2]), train_cross_modal(ds, cfg, [2])
    assert a.history == b.history
    assert np.array_equal(a.labels, b.labels)


def _constant_dataset(level=40.0, noise=0.5, n=80, seed=0):
    rng = np.random.default_rng(seed)
    images = rng.random((n, 3, 16, 16, 3)).astype(np.float32)
    meas = np.clip(level + noise * rng.standard_normal((n, 5, 15)), 0, 100).astype(np.float32)
    tr, va = split_ids(n, seed)
    return ArrayDataset(images, np.array([-10.0, 0.0, 10.0], np.float32), meas, np.array(tr), np.array(va))


def test_regression_constant_target_reaches_noise_floor():
    ds = _constant_dataset(n=240)
    est = train_regression_baseline(ds, TrainConfig(epochs=30, lr=3e-3, **SMALL), [0])
    pred = est.predict_dataset(ds, ds.val_ids)[:, 0]
    truth = ds.targets[ds.val_ids, 0]
    # per-sample target is a 5-measurement mean with std 0.5/sqrt(5)
    assert np.mean((pred - truth) ** 2) < 0.5


@pytest.mark.slow
def test_estimation_loss_decreases_on_desk(desk):
    est = train_cross_modal(desk, TrainConfig(lr=1e-3), [index_of("tCO")])
    assert est.history[-1]["est"] < est.history[0]["est"]


@pytest.mark.slow
def test_embedding_loss_decreases_without_other_terms(desk):
    cfg = TrainConfig(epochs=10, lr=1e-3, weights=LossWeights(1.0, 0.0, 0.0))
    est = train_cross_modal(desk, cfg, [index_of("mTX")])
    assert est.history[-1]["emb"] < est.history[0]["emb"]


@pytest.mark.slow
def test_zero_weights_frozen_tactile_matches_regression(desk):
    j = index_of("tCO")
    truth = desk.targets[desk.val_ids, j]
    mses = {}
    for name, fn, extra in (("cm", train_cross_modal, dict(weights=LossWeights(0, 0, 0), freeze_tactile_encoder=True)),
                            ("reg", train_regression_baseline, {})):
        errs = []
        for seed in range(3):
            est = fn(desk, TrainConfig(lr=1e-3, seed=seed, **extra), [j])
            errs.append(np.mean((est.predict_dataset(desk, desk.val_ids)[:, 0] - truth) ** 2))
        mses[name] = np.mean(errs)
    assert abs(mses["cm"] - mses["reg"]) <= 0.35 * max(mses.values())

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from visuotactile import gradcore as G
from visuotactile.viewselect import (
    EMABaseline,
    MultiViewConfig,
    MultiViewEstimator,
    MultiViewRun,
    SelectorBank,
    TRNConfig,
    ValueNetwork,
    ValueTrainer,
    fuse_views,
    log_prob_grad,
    onehot_selection,
    reinforce_update,
    sample_equidistant,
    sample_random,
    sample_trn_subsets,
    select_deterministic,
    select_stochastic,
    select_views,
    single_view_signal_dataset,
    train_multiview_baseline,
    train_three_stage,
    value_predict,
    write_selection_log,
)

TINY = dict(channels=(4, 8), hidden=16, latent_dim=8)


# ---------------------------------------------------------------- selection rule

def test_deterministic_one_hot_and_ties():
    z = np.zeros((2, 10))
    z[0, 7] = 5.0
    assert list(select_deterministic(SelectorBank(z))) == [7, 0]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 5), st.integers(1, 12))
def test_deterministic_matches_brute_force(seed, M, N):
    z = np.random.default_rng(seed).normal(size=(M, N))
    p = np.exp(z) / np.exp(z).sum(axis=1, keepdims=True)
    expect = [max(range(N), key=lambda i: (p[m, i], -i)) for m in range(M)]
    assert list(select_deterministic(SelectorBank(z))) == expect
    shifted = SelectorBank(z + np.random.default_rng(seed + 1).normal(size=(M, 1)) * 10)
    assert list(select_deterministic(shifted)) == expect


def test_deterministic_rejects_non_finite():
    with pytest.raises(ValueError):
        select_deterministic(SelectorBank([[0.0, np.nan]]))


def test_stochastic_degenerate_matches_argmax():
    z = np.zeros((3, 6))
    z[[0, 1, 2], [4, 1, 4]] = 1.0
    bank = SelectorBank(z * 50)
    rng = np.random.default_rng(0)
    for _ in range(20):
        assert np.array_equal(select_stochastic(bank, rng), select_deterministic(bank))


def test_stochastic_uniform_frequencies():
    bank = SelectorBank.uniform(1, 4)
    rng = np.random.default_rng(1)
    draws = np.array([select_stochastic(bank, rng)[0] for _ in range(100_000)])
    assert np.allclose(np.bincount(draws, minlength=4) / draws.size, 0.25, atol=0.01)


def test_stochastic_seeded():
    bank = SelectorBank(np.random.default_rng(2).normal(size=(3, 9)))
    a = [select_stochastic(bank, np.random.default_rng(5)) for _ in range(3)]
    b = [select_stochastic(bank, np.random.default_rng(5)) for _ in range(3)]
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


# ---------------------------------------------------------------- REINFORCE

def test_update_no_advantage_is_identity():
    bank = SelectorBank(np.random.default_rng(3).normal(size=(2, 5)))
    assert np.array_equal(reinforce_update(bank, [1, 4], 0.3, 0.3, 0.1).z, bank.z)


def test_log_prob_grad_rows_sum_to_zero():
    bank = SelectorBank(np.random.default_rng(4).normal(size=(4, 7)))
    g = log_prob_grad(bank, [0, 3, 6, 2])
    assert np.allclose(g.sum(axis=1), 0.0, atol=1e-12)


def test_log_prob_grad_rejects_bad_q():
    with pytest.raises(ValueError):
        log_prob_grad(SelectorBank.uniform(2, 3), [0, 3])


def _bandit_reward(arm):
    return 1.0 if arm == 0 else 0.0


def test_bandit_estimator_matches_analytic_gradient():
    bank = SelectorBank([[0.3, -0.2]])
    p = bank.probabilities()[0]
    analytic = sum(p[a] * _bandit_reward(a) * (np.eye(2)[a] - p) for a in range(2))
    rng = np.random.default_rng(6)
    total = np.zeros(2)
    n = 100_000
    for _ in range(n):
        q = select_stochastic(bank, rng)
        total += _bandit_reward(q[0]) * log_prob_grad(bank, q)[0]
    est = total / n
    assert np.all(np.abs(est - analytic) <= 0.05 * np.abs(analytic))


def test_bandit_converges_to_better_arm():
    bank = SelectorBank.uniform(1, 2)
    rng = np.random.default_rng(7)
    for _ in range(2000):
        q = select_stochastic(bank, rng)
        bank = reinforce_update(bank, q, _bandit_reward(q[0]), 0.0, 0.1)
    assert bank.probabilities()[0, 0] > 0.99


def test_ema_baseline():
    b = EMABaseline(0.9)
    assert b.current(2.0) == 2.0
    b.update(2.0)
    b.update(1.0)
    assert b.value == pytest.approx(0.9 * 2.0 + 0.1 * 1.0)


# ---------------------------------------------------------------- baselines

def test_equidistant_examples():
    assert list(sample_equidistant(100, 3)) == [0, 50, 99]
    assert list(sample_equidistant(5, 5)) == [0, 1, 2, 3, 4]
    assert list(sample_equidistant(7, 3)) == [0, 3, 6]
    assert list(sample_equidistant(10, 1)) == [4]
    assert list(sample_equidistant(6, 3)) == [0, 3, 5]  # 2.5 rounds away from zero


def test_random_sampling():
    assert list(sample_random(1, 4, np.random.default_rng(0))) == [0, 0, 0, 0]
    draws = np.concatenate([sample_random(5, 3, np.random.default_rng(s)) for s in range(20_000)])
    assert np.allclose(np.bincount(draws) / draws.size, 0.2, atol=0.01)
    assert np.array_equal(sample_random(20, 3, np.random.default_rng(9)), sample_random(20, 3, np.random.default_rng(9)))


def test_trn_subsets():
    rng = np.random.default_rng(10)
    sizes = []
    for _ in range(10_000 // 8):
        for s in sample_trn_subsets(20, TRNConfig(max_size=4), rng):
            assert 2 <= len(s) <= 4 and len(set(s)) == len(s) and s.max() < 20
            sizes.append(len(s))
    assert set(sizes) == {2, 3, 4}
    assert all(len(s) == 2 for s in sample_trn_subsets(20, TRNConfig(max_size=2), rng))
    a = sample_trn_subsets(20, TRNConfig(), np.random.default_rng(3))
    b = sample_trn_subsets(20, TRNConfig(), np.random.default_rng(3))
    assert all(np.array_equal(x, y) for x, y in zip(a, b)) and len(a) == 8


# ---------------------------------------------------------------- fusion

def test_fuse_views_examples():
    a = np.array([[1.0, 5.0]])
    b = np.array([[3.0, 2.0]])
    assert np.array_equal(fuse_views([a], "maxpool").data, a)
    assert np.array_equal(fuse_views([a, b], "maxpool").data, [[3.0, 5.0]])
    assert np.array_equal(fuse_views([b, a], "maxpool").data, [[3.0, 5.0]])
    assert not np.array_equal(fuse_views([a, b], "concat").data, fuse_views([b, a], "concat").data)
    with pytest.raises(ValueError):
        fuse_views([a], "sum")


def test_viewpool_estimator_permutation_invariant():
    rng = np.random.default_rng(11)
    views = rng.random((2, 3, 8, 8, 3))
    pool = MultiViewEstimator(3, 4, np.random.default_rng(0), fusion="maxpool", **TINY)
    cat = MultiViewEstimator(3, 4, np.random.default_rng(0), fusion="concat", **TINY)
    perm = views[:, [2, 0, 1]]
    assert np.allclose(pool(views).data, pool(perm).data)
    assert not np.allclose(cat(views).data, cat(perm).data)
    out = cat(views).data
    assert out.shape == (2, 4) and out.min() >= 0 and out.max() <= 100


# ---------------------------------------------------------------- value network

def test_value_network_basics():
    bank = SelectorBank(np.random.default_rng(12).normal(size=(3, 5)))
    zero = ValueNetwork(3, 5, np.random.default_rng(0), zero_last=True)
    assert value_predict(zero, bank) == 0.0
    vnet = ValueNetwork(3, 5, np.random.default_rng(0))
    assert value_predict(vnet, bank) == value_predict(vnet, bank)
    with pytest.raises(ValueError):
        value_predict(vnet, np.ones((3, 5)))


def test_value_training_non_increasing_and_discriminates():
    rng = np.random.default_rng(13)
    vnet = ValueNetwork(2, 4, np.random.default_rng(1))
    trainer = ValueTrainer(vnet, lr=1e-3)
    for _ in range(64):
        q = rng.integers(0, 4, size=2)
        trainer.add(onehot_selection(q, 4), float(q[0] == 2) + 0.5 * float(q[1]))
    losses = [trainer.loss().item()]
    for _ in range(60):
        trainer.step()
        losses.append(trainer.loss().item())
    assert all(b <= a + 1e-9 for a, b in zip(losses, losses[1:]))
    good, bad = onehot_selection([0, 0], 4), onehot_selection([2, 3], 4)
    assert value_predict(vnet, good) < value_predict(vnet, bad)


# ---------------------------------------------------------------- training

def test_single_signal_view_recovered():
    hits = 0
    for seed in range(3):
        ds = single_view_signal_dataset(seed=seed)
        q, *_ = select_views(ds, MultiViewConfig(M=1, lr=1e-3, seed=seed, **TINY), "nvs", [0])
        hits += int(q[0] == 5)
    assert hits >= 2


def test_three_stage_smoke_log_and_checkpoint(tmp_path):
    ds = single_view_signal_dataset(num_samples=40, seed=0)
    cfg = MultiViewConfig(M=2, epochs=1, stage2_iters=12, pool_size=8, lr=1e-3, **TINY)
    run = train_three_stage(ds, cfg, "vbnvs", [0])
    assert run.q_star.shape == (2,) and len(run.selection_log) == 12
    path = write_selection_log(tmp_path / "sel.csv", run.selection_log, 2)
    lines = path.read_text().splitlines()
    assert lines[0] == "iter,q_0,q_1,loss,reward_baseline" and len(lines) == 13
    ck = run.save(tmp_path / "mv.ckpt")
    back = MultiViewRun.load(ck)
    assert np.array_equal(back.q_star, run.q_star)
    a, b = run.predict_dataset(ds, ds.val_ids), back.predict_dataset(ds, ds.val_ids)
    assert np.max(np.abs(a - b)) < 1e-6


@pytest.mark.parametrize("method", ["random", "equidistant", "late", "viewpool", "trn"])
def test_baselines_smoke(method):
    ds = single_view_signal_dataset(num_samples=30, seed=1)
    run = train_multiview_baseline(ds, MultiViewConfig(epochs=1, **TINY), method, [0, 1])
    pred = run.predict_dataset(ds, ds.val_ids)
    assert pred.shape == (len(ds.val_ids), 2) and np.all((pred >= 0) & (pred <= 100))
    again = train_multiview_baseline(ds, MultiViewConfig(epochs=1, **TINY), method, [0, 1])
    assert np.array_equal(pred, again.predict_dataset(ds, ds.val_ids))


def test_unknown_methods_rejected():
    ds = single_view_signal_dataset(num_samples=20)
    with pytest.raises(ValueError):
        train_multiview_baseline(ds, MultiViewConfig(), "nvs")
    with pytest.raises(ValueError):
        select_views(ds, MultiViewConfig(), "random")


@pytest.mark.slow
def test_stage3_not_worse_than_stage1_random():
    from visuotactile.viewselect import stage1_random_predictions
    s1, s3 = [], []
    for seed in range(3):
        ds = single_view_signal_dataset(seed=seed)
        run = train_three_stage(ds, MultiViewConfig(M=1, lr=1e-3, seed=seed, **TINY), "nvs", [0])
        truth = ds.targets[ds.val_ids, 0]
        s1.append(np.mean((stage1_random_predictions(run, ds, ds.val_ids)[:, 0] - truth) ** 2))
        s3.append(np.mean((run.predict_dataset(ds, ds.val_ids)[:, 0] - truth) ** 2))
    assert np.mean(s3) <= np.mean(s1)


def test_gradient_through_fusion_head():
    rng = np.random.default_rng(14)
    with G.precision(np.float64):
        m = MultiViewEstimator(2, 3, rng, fusion="maxpool", **TINY)
    feats = rng.normal(size=(4, 2, 8))
    target = rng.uniform(0, 100, size=(4, 3))
    for p in m.head_parameters().values():
        p.data = p.data + rng.normal(0, 0.1, size=p.shape)
        assert G.gradient_check(lambda: G.mse(m.head_forward(feats), target), p, epsilon=1e-5) < 1e-3

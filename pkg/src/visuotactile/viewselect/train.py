"""Multi-view training: sampling baselines and three-stage NVS / VB-NVS."""

import csv
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import gradcore as G
from ..crossmodal.checkpoint import decode_text, encode_text, load_checkpoint, save_checkpoint
from ..crossmodal.models import Standardizer
from ..crossmodal.train import DivergenceError
from ..gradcore import Adam, Tensor
from ..synthsps.registry import ACRONYMS
from .fusion import MultiViewEstimator, TRNEstimator
from .sampling import TRNConfig, sample_equidistant, sample_random, sample_trn_subset
from .selector import EMABaseline, SelectorBank, reinforce_update, select_deterministic, select_stochastic
from .value import ValueNetwork, ValueTrainer, onehot_selection, value_predict

log = logging.getLogger(__name__)

BASELINES = ("random", "equidistant", "late", "viewpool", "trn")
SELECTORS = ("nvs", "vbnvs")


@dataclass
class MultiViewConfig:
    M: int = 3
    epochs: int = 30
    lr: float = 1e-4
    batch_size: int = 16
    latent_dim: int = 100
    hidden: int = 64
    channels: tuple = (8, 16, 32)
    fusion: str = "concat"
    policy_lr: float = 0.05
    stage2_iters: int = 500
    baseline_decay: float = 0.9
    pool_size: int = 256
    holdout_frac: float = 0.2
    reward_batch: int = 32
    value_lr: float = 1e-3
    value_hidden: int = 32
    trn_max_size: int = 3
    trn_subsets: int = 8
    seed: int = 0

    def to_dict(self):
        d = asdict(self)
        d["channels"] = list(self.channels)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "channels" in d:
            d["channels"] = tuple(d["channels"])
        return cls(**d)


def gather_views(images, ids, q):
    """images (S, N, H, W, 3); q (M,) shared or (B, M) per sample -> (B, M, H, W, 3)."""
    ids = np.asarray(ids)
    q = np.asarray(q, dtype=np.int64)
    if q.ndim == 1:
        return images[ids][:, q]
    return images[ids[:, None], q]


def _batches(rng, n, size):
    order = rng.permutation(n)
    for i in range(0, n, size):
        yield order[i:i + size]


def _std_tensor(t, std):
    return G.mul(G.sub(t, std.mean.astype(np.float32)), (1.0 / std.std).astype(np.float32))


def fit(model, images, ids, z, std, q_fn, epochs, lr, batch_size, rng, params=None):
    """Minimise standardized MSE; ``q_fn(rng, batch)`` gives the views per sample."""
    params = params if params is not None else model.named_parameters()
    opt = Adam(params, lr=lr)
    ids = np.asarray(ids)
    history = []
    for epoch in range(epochs):
        total = 0.0
        for b in _batches(rng, len(ids), batch_size):
            views = gather_views(images, ids[b], q_fn(rng, len(b)))
            loss = G.mse(_std_tensor(model(views), std), Tensor(z[ids[b]]))
            if not np.isfinite(loss.item()):
                raise DivergenceError(f"multi-view loss diverged in epoch {epoch + 1}")
            G.zero_grad(params)
            opt.step(G.backward(loss, params))
            total += loss.item() * len(b)
        history.append({"epoch": epoch + 1, "est": total / len(ids)})
    return history


def predict(model, images, ids, q, batch_size=64):
    ids = np.asarray(ids)
    q = np.asarray(q, dtype=np.int64)
    out = []
    for i in range(0, len(ids), batch_size):
        qi = q if q.ndim == 1 else q[i:i + batch_size]
        out.append(model(gather_views(images, ids[i:i + batch_size], qi)).data.astype(np.float64))
    return np.concatenate(out, axis=0)


def _eval_rng(seed):
    return np.random.default_rng([seed, 0xE7A1])


@dataclass
class MultiViewRun:
    method: str
    model: object
    outputs: list
    standardizer: Standardizer
    config: MultiViewConfig
    num_views: int
    q_star: np.ndarray = None
    history: list = field(default_factory=list)
    selection_log: list = field(default_factory=list)
    bank: SelectorBank = None
    extras: dict = field(default_factory=dict)

    def predict_dataset(self, dataset, ids):
        images = dataset.images
        N = images.shape[1]
        cfg = self.config
        if self.method in ("late", "viewpool"):
            return predict(self.model, images, ids, np.arange(N))
        if self.method == "random":
            q = _eval_rng(cfg.seed).integers(0, N, size=(len(ids), cfg.M))
            return predict(self.model, images, ids, q)
        if self.method == "trn":
            rng = _eval_rng(cfg.seed)
            preds = []
            for _ in range(cfg.trn_subsets):
                q = sample_trn_subset(N, cfg.trn_max_size, rng)
                preds.append(predict(self.model, images, ids, q))
            return np.mean(preds, axis=0)
        return predict(self.model, images, ids, self.q_star)

    # ------------------------------------------------------------ persistence
    def save(self, path, extra_meta=None):
        t = {f"param.{k}": v for k, v in self.model.state_dict().items()}
        t["stats.mean"] = self.standardizer.mean
        t["stats.std"] = self.standardizer.std
        t["meta.outputs"] = np.asarray(self.outputs, dtype=np.float32)
        t["meta.kind"] = encode_text("multiview:" + self.method)
        t["meta.registry"] = encode_text(",".join(ACRONYMS))
        t["meta.config"] = encode_text(json.dumps(self.config.to_dict(), sort_keys=True))
        t["meta.num_views"] = np.array([self.num_views], dtype=np.float32)
        if self.q_star is not None:
            t["meta.q_star"] = np.asarray(self.q_star, dtype=np.float32)
        for k, v in (extra_meta or {}).items():
            t[f"meta.{k}"] = encode_text(v)
        return save_checkpoint(path, t)

    @classmethod
    def from_state(cls, t):
        method = decode_text(t["meta.kind"]).split(":", 1)[1]
        cfg = MultiViewConfig.from_dict(json.loads(decode_text(t["meta.config"])))
        outputs = [int(i) for i in t["meta.outputs"]]
        num_views = int(t["meta.num_views"][0])
        model = build_model(method, cfg, len(outputs), num_views, np.random.default_rng(0))
        model.load_state_dict({k[len("param."):]: v for k, v in t.items() if k.startswith("param.")})
        q_star = t["meta.q_star"].astype(np.int64) if "meta.q_star" in t else None
        std = Standardizer(t["stats.mean"].astype(np.float64), t["stats.std"].astype(np.float64))
        return cls(method, model, outputs, std, cfg, num_views, q_star)

    @classmethod
    def load(cls, path):
        return cls.from_state(load_checkpoint(path))


def build_model(method, cfg, out_dim, num_views, rng):
    if method == "trn":
        return TRNEstimator(cfg.trn_max_size, out_dim, rng, cfg.latent_dim, cfg.hidden, cfg.channels)
    if method == "late":
        return MultiViewEstimator(num_views, out_dim, rng, cfg.latent_dim, "concat", cfg.hidden, cfg.channels)
    if method == "viewpool":
        return MultiViewEstimator(num_views, out_dim, rng, cfg.latent_dim, "maxpool", cfg.hidden, cfg.channels)
    return MultiViewEstimator(cfg.M, out_dim, rng, cfg.latent_dim, cfg.fusion, cfg.hidden, cfg.channels)


def _prepare(dataset, outputs):
    outputs = list(range(15)) if outputs is None else list(outputs)
    tr = np.asarray(dataset.train_ids)
    std15 = Standardizer.fit(dataset.targets[tr])
    std = Standardizer(std15.mean[outputs], std15.std[outputs])
    z = np.zeros((len(dataset.targets), len(outputs)), dtype=np.float32)
    z[:] = std.forward(dataset.targets[:, outputs])
    return outputs, tr, std, z


def train_multiview_baseline(dataset, config, method, outputs=None):
    """Train one of the non-learned sampling / fusion baselines."""
    if method not in BASELINES:
        raise ValueError(f"unknown baseline {method!r}; expected one of {BASELINES}")
    outputs, tr, std, z = _prepare(dataset, outputs)
    N = dataset.images.shape[1]
    rng = np.random.default_rng([config.seed, 0x3B1E])
    model = build_model(method, config, len(outputs), N, rng)
    if method == "random":
        q_fn = lambda r, b: r.integers(0, N, size=(b, config.M))  # noqa: E731
    elif method == "equidistant":
        q = sample_equidistant(N, config.M)
        q_fn = lambda r, b: q  # noqa: E731
    elif method in ("late", "viewpool"):
        q_fn = lambda r, b: np.arange(N)  # noqa: E731
    else:
        trn = TRNConfig(config.trn_max_size, config.trn_subsets)
        q_fn = lambda r, b: sample_trn_subset(N, trn.max_size, r)  # noqa: E731
    history = fit(model, dataset.images, tr, z, std, q_fn, config.epochs, config.lr, config.batch_size, rng)
    q_star = sample_equidistant(N, config.M) if method == "equidistant" else None
    return MultiViewRun(method, model, outputs, std, config, N, q_star, history)


# ---------------------------------------------------------------- NVS / VB-NVS

def _features(model, images, ids, batch_size=64):
    """Frozen per-view encoder features, (len(ids), N, L)."""
    out = []
    N = images.shape[1]
    for i in range(0, len(ids), batch_size):
        chunk = images[ids[i:i + batch_size]]
        out.append(model.encode(chunk.reshape((-1, N) + chunk.shape[2:])).data)
    return np.concatenate(out, axis=0)


def _head_loss(model, feats, z, q, std):
    pred = model.head_forward(Tensor(feats[:, q]))
    return G.mse(_std_tensor(pred, std), Tensor(z))


def select_views(dataset, config, method="nvs", outputs=None):
    """Stages 1 and 2: returns ``(q_star, stage1_model, bank, vnet, log, context)``."""
    if method not in SELECTORS:
        raise ValueError(f"unknown selector {method!r}; expected one of {SELECTORS}")
    outputs, tr, std, z = _prepare(dataset, outputs)
    images = dataset.images
    N = images.shape[1]
    M = config.M
    rng = np.random.default_rng([config.seed, 0x5E1E])
    perm = rng.permutation(tr)
    n_hold = max(1, int(round(config.holdout_frac * len(tr))))
    hold, fit_ids = np.sort(perm[:n_hold]), np.sort(perm[n_hold:])

    # stage 1: random view combinations
    model = build_model(method, config, len(outputs), N, rng)
    q_fn = lambda r, b: r.integers(0, N, size=(b, M))  # noqa: E731
    history = fit(model, images, fit_ids, z, std, q_fn, config.epochs, config.lr, config.batch_size, rng)

    # stage 2: frozen encoder, head keeps training, policy by REINFORCE
    f_fit = _features(model, images, fit_ids)
    f_hold = _features(model, images, hold)
    z_fit, z_hold = z[fit_ids], z[hold]
    head_params = model.head_parameters()
    head_opt = Adam(head_params, lr=config.lr)
    bank = SelectorBank.uniform(M, N)
    baseline = EMABaseline(config.baseline_decay)
    vnet = trainer = None
    if method == "vbnvs":
        vnet = ValueNetwork(M, N, rng, hidden=config.value_hidden)
        trainer = ValueTrainer(vnet, lr=config.value_lr)
    sel_log = []
    for it in range(config.stage2_iters):
        q = select_stochastic(bank, rng)
        b = rng.choice(len(fit_ids), size=min(config.batch_size, len(fit_ids)), replace=False)
        loss = _head_loss(model, f_fit[b], z_fit[b], q, std)
        G.zero_grad(head_params)
        head_opt.step(G.backward(loss, head_params))
        r = rng.choice(len(hold), size=min(config.reward_batch, len(hold)), replace=False)
        observed = _head_loss(model, f_hold[r], z_hold[r], q, std).item()
        if not np.isfinite(observed):
            raise DivergenceError(f"stage-2 loss diverged at iteration {it}")
        reward = -observed
        base = baseline.current(reward)
        bank = reinforce_update(bank, q, reward, base, config.policy_lr)
        baseline.update(reward)
        if trainer is not None:
            trainer.add(onehot_selection(q, N), observed)
            trainer.step(rng, batch_size=64)
        sel_log.append({"iter": it, "q": [int(v) for v in q], "loss": observed, "reward_baseline": base})

    if method == "nvs":
        q_star = select_deterministic(bank)
    else:
        pool = [select_stochastic(bank, rng) for _ in range(config.pool_size)]
        pool.append(select_deterministic(bank))
        scores = [value_predict(vnet, onehot_selection(q, N)) for q in pool]
        q_star = pool[int(np.argmin(scores))]
    ctx = {"outputs": outputs, "std": std, "z": z, "history": history, "holdout": hold}
    return np.asarray(q_star, dtype=np.int64), model, bank, vnet, sel_log, ctx


def train_three_stage(dataset, config, method="nvs", outputs=None):
    """Full selection pipeline; stage 3 retrains from scratch on ``q_star``."""
    q_star, stage1, bank, vnet, sel_log, ctx = select_views(dataset, config, method, outputs)
    tr = np.asarray(dataset.train_ids)
    N = dataset.images.shape[1]
    rng = np.random.default_rng([config.seed, 0x57A3])
    model = build_model(method, config, len(ctx["outputs"]), N, rng)
    history = fit(model, dataset.images, tr, ctx["z"], ctx["std"], lambda r, b: q_star,
                  config.epochs, config.lr, config.batch_size, rng)
    run = MultiViewRun(method, model, ctx["outputs"], ctx["std"], config, N, q_star, history, sel_log, bank)
    run.extras = {"stage1_model": stage1, "stage1_history": ctx["history"], "value_network": vnet}
    return run


def stage1_random_predictions(run, dataset, ids):
    """Stage-1 estimator on random view combinations (for comparison with q_star)."""
    N = dataset.images.shape[1]
    q = _eval_rng(run.config.seed).integers(0, N, size=(len(ids), run.config.M))
    return predict(run.extras["stage1_model"], dataset.images, ids, q)


def write_selection_log(path, sel_log, M):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter"] + [f"q_{m}" for m in range(M)] + ["loss", "reward_baseline"])
        for row in sel_log:
            w.writerow([row["iter"]] + row["q"] + [repr(row["loss"]), repr(row["reward_baseline"])])
    return path

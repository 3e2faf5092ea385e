"""Training loops for the cross-modal estimator and the regression baseline."""

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import gradcore as G
from ..gradcore import Adam, ConvEncoder, Tensor
from ..synthsps.registry import ACRONYMS
from . import losses as L
from .checkpoint import decode_text, encode_text, load_checkpoint, save_checkpoint
from .models import CrossModalModel, RegressionModel, Standardizer, predict
from .pseudolabel import PseudoLabeler, build_pseudo_labels

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 30
    lr: float = 1e-4
    batch_size: int = 16
    latent_dim: int = 50
    hidden: int = 64
    channels: tuple = (8, 16, 32)
    k: int = 6
    d_pca: int = 30
    weights: L.LossWeights = field(default_factory=L.LossWeights)
    freeze_tactile_encoder: bool = False
    view_index: int = None  # None -> the view closest to 0 degrees
    seed: int = 0

    def to_dict(self):
        d = asdict(self)
        d["channels"] = list(self.channels)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "weights" in d and isinstance(d["weights"], dict):
            d["weights"] = L.LossWeights(**d["weights"])
        if "channels" in d:
            d["channels"] = tuple(d["channels"])
        return cls(**d)


class DivergenceError(G.NumericError):
    pass


@dataclass
class TrainedEstimator:
    """A trained single-image model plus everything needed to evaluate it."""

    kind: str  # "crossmodal" | "regression"
    model: object
    outputs: list
    standardizer: Standardizer  # all 15 columns, train split
    config: TrainConfig
    history: list = field(default_factory=list)
    labeler: PseudoLabeler = None
    labels: np.ndarray = None

    @property
    def out_standardizer(self):
        return Standardizer(self.standardizer.mean[self.outputs], self.standardizer.std[self.outputs])

    def view_of(self, dataset):
        return dataset.nadir_index if self.config.view_index is None else self.config.view_index

    def predict(self, images):
        return predict(self.model, images)

    def predict_dataset(self, dataset, ids):
        return self.predict(dataset.images[ids, self.view_of(dataset)])

    # ------------------------------------------------------------ persistence
    def state(self):
        tensors = {f"param.{k}": v for k, v in self.model.state_dict().items()}
        tensors["stats.mean"] = self.standardizer.mean
        tensors["stats.std"] = self.standardizer.std
        tensors["meta.outputs"] = np.asarray(self.outputs, dtype=np.float32)
        tensors["meta.kind"] = encode_text(self.kind)
        tensors["meta.registry"] = encode_text(",".join(ACRONYMS))
        tensors["meta.config"] = encode_text(json.dumps(self.config.to_dict(), sort_keys=True))
        if self.labeler is not None:
            for k, v in self.labeler.to_arrays().items():
                tensors[f"labeler.{k}"] = v
        return tensors

    def save(self, path, extra_meta=None):
        tensors = self.state()
        for k, v in (extra_meta or {}).items():
            tensors[f"meta.{k}"] = encode_text(v)
        return save_checkpoint(path, tensors)

    @classmethod
    def load(cls, path):
        t = load_checkpoint(path)
        return cls.from_state(t)

    @classmethod
    def from_state(cls, t):
        kind = decode_text(t["meta.kind"])
        config = TrainConfig.from_dict(json.loads(decode_text(t["meta.config"])))
        outputs = [int(i) for i in t["meta.outputs"]]
        rng = np.random.default_rng(0)
        if kind == "crossmodal":
            model = CrossModalModel(len(outputs), rng, config.latent_dim, config.k, config.hidden, config.channels)
        else:
            model = RegressionModel(len(outputs), rng, config.channels)
        model.load_state_dict({k[len("param."):]: v for k, v in t.items() if k.startswith("param.")})
        labeler = None
        if "labeler.centers" in t:
            labeler = PseudoLabeler.from_arrays({k[len("labeler."):]: v.astype(np.float64)
                                                 for k, v in t.items() if k.startswith("labeler.")})
        std = Standardizer(t["stats.mean"].astype(np.float64), t["stats.std"].astype(np.float64))
        return cls(kind, model, outputs, std, config, labeler=labeler)


def registry_of(tensors):
    return tuple(decode_text(tensors["meta.registry"]).split(","))


def _batches(rng, n, size):
    order = rng.permutation(n)
    for i in range(0, n, size):
        yield order[i:i + size]


def _check_finite(value, what, epoch):
    if not np.isfinite(value):
        raise DivergenceError(f"{what} diverged (non-finite) in epoch {epoch + 1}")


def label_features(images, seed, channels=(8, 16, 32), batch_size=64):
    """Frozen, randomly initialised encoder trunk used only for clustering."""
    enc = ConvEncoder(1, np.random.default_rng([seed, 0xFEA7]), channels)
    feats = [enc.trunk(images[i:i + batch_size]).data.astype(np.float64)
             for i in range(0, len(images), batch_size)]
    return np.concatenate(feats, axis=0)


def train_cross_modal(dataset, config, outputs=None):
    """Train the cross-modal estimator on single nadir images.

    ``outputs`` are the property column indices to estimate (default: all 15,
    i.e. joint mode; pass one index for per-property mode).
    """
    outputs = list(range(15)) if outputs is None else list(outputs)
    rng = np.random.default_rng([config.seed, 0xC0DE])
    view = dataset.nadir_index if config.view_index is None else config.view_index
    tr = np.asarray(dataset.train_ids)
    images = dataset.images[tr, view]
    t15 = dataset.targets[tr]
    std15 = Standardizer.fit(t15)
    z15 = std15.forward(t15).astype(np.float32)
    zout = z15[:, outputs]
    w = config.weights

    model = CrossModalModel(len(outputs), rng, config.latent_dim, config.k, config.hidden, config.channels)
    labels = labeler = None
    if w.classification > 0:
        feats = label_features(images, config.seed, config.channels)
        labels, labeler, _ = build_pseudo_labels(feats, t15, config.d_pca, config.k, config.seed)

    gen_params = model.generator_parameters()
    if config.freeze_tactile_encoder:
        gen_params = {k: v for k, v in gen_params.items() if not k.startswith("E_t.")}
    disc_params = model.discriminator_parameters()
    all_params = model.named_parameters()
    opt_g = Adam(gen_params, lr=config.lr)
    opt_d = Adam(disc_params, lr=config.lr) if w.adversarial > 0 else None
    out_mean = std15.mean[outputs].astype(np.float32)
    out_inv = (1.0 / std15.std[outputs]).astype(np.float32)

    history = []
    for epoch in range(config.epochs):
        sums = dict(est=0.0, emb=0.0, adv_d=0.0, adv_g=0.0, cls=0.0, total=0.0)
        count = 0
        for idx in _batches(rng, len(tr), config.batch_size):
            xb = Tensor(images[idx])
            tb = Tensor(zout[idx])
            e_v = model.E_v(xb)
            t_hat = model.generate(e_v)
            t_hat_std = G.mul(G.sub(t_hat, out_mean), out_inv)

            adv_g = None
            if opt_d is not None:
                G.zero_grad(all_params)
                feats = model.F_d(xb)
                d_loss = L.discriminator_loss(model.discriminate(feats, tb),
                                              model.discriminate(feats, t_hat_std.detach()))
                opt_d.step(G.backward(d_loss, disc_params))
                sums["adv_d"] += d_loss.item() * len(idx)
                g_fake = model.discriminate(model.F_d(xb).detach(), t_hat_std)
                adv_g = L.generator_loss(g_fake, t_hat_std, tb)

            est = L.loss_est(t_hat_std, tb)
            emb = None
            if w.embedding > 0:
                e_t = model.E_t(Tensor(z15[idx]))
                emb = L.loss_emb(e_v, e_t)
            cls = None
            if w.classification > 0:
                cls = L.loss_class(model.classify(e_v), labels[idx], config.k)
            total = L.total_loss((est, emb, adv_g, cls), w)
            _check_finite(total.item(), "training loss", epoch)
            G.zero_grad(all_params)
            opt_g.step(G.backward(total, gen_params))

            n = len(idx)
            count += n
            sums["est"] += est.item() * n
            sums["total"] += total.item() * n
            if emb is not None:
                sums["emb"] += emb.item() * n
            if adv_g is not None:
                sums["adv_g"] += adv_g.item() * n
            if cls is not None:
                sums["cls"] += cls.item() * n
        entry = {k: v / count for k, v in sums.items()}
        entry["epoch"] = epoch + 1
        history.append(entry)
        log.debug("crossmodal epoch %d %s", epoch + 1, entry)
    return TrainedEstimator("crossmodal", model, outputs, std15, config, history, labeler, labels)


def train_regression_baseline(dataset, config, outputs=None):
    """Image encoder regressed straight onto the (standardized) targets."""
    outputs = list(range(15)) if outputs is None else list(outputs)
    rng = np.random.default_rng([config.seed, 0xC0DE])
    view = dataset.nadir_index if config.view_index is None else config.view_index
    tr = np.asarray(dataset.train_ids)
    images = dataset.images[tr, view]
    t15 = dataset.targets[tr]
    std15 = Standardizer.fit(t15)
    zout = std15.forward(t15).astype(np.float32)[:, outputs]
    model = RegressionModel(len(outputs), rng, config.channels)
    params = model.named_parameters()
    opt = Adam(params, lr=config.lr)
    out_mean = std15.mean[outputs].astype(np.float32)
    out_inv = (1.0 / std15.std[outputs]).astype(np.float32)
    history = []
    for epoch in range(config.epochs):
        total, count = 0.0, 0
        for idx in _batches(rng, len(tr), config.batch_size):
            pred = G.mul(G.sub(model.predict_raw(images[idx]), out_mean), out_inv)
            loss = L.loss_est(pred, Tensor(zout[idx]))
            _check_finite(loss.item(), "regression loss", epoch)
            G.zero_grad(params)
            opt.step(G.backward(loss, params))
            total += loss.item() * len(idx)
            count += len(idx)
        history.append({"epoch": epoch + 1, "est": total / count, "total": total / count})
    return TrainedEstimator("regression", model, outputs, std15, config, history)

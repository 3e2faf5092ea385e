"""Objective terms of the cross-modal framework.

All functions take and return :class:`~visuotactile.gradcore.Tensor` so they
can be differentiated; batch inputs are averaged over the batch.
"""

from dataclasses import dataclass

import numpy as np

from .. import gradcore as G


@dataclass
class LossWeights:
    embedding: float = 1.0
    adversarial: float = 0.1
    classification: float = 0.1

    def __post_init__(self):
        if min(self.embedding, self.adversarial, self.classification) < 0:
            raise ValueError("loss weights must be nonnegative")


def loss_emb(e_v, e_t):
    """Squared Euclidean distance between paired embeddings (batch mean)."""
    e_v, e_t = G.as_tensor(e_v), G.as_tensor(e_t)
    if e_v.shape != e_t.shape:
        raise G.ShapeError(f"loss_emb: embedding shapes differ {e_v.shape} vs {e_t.shape}")
    d = G.square(G.sub(e_t, e_v))
    if len(d.shape) == 1:
        return G.sum(d)
    return G.mean(G.sum(d, axis=-1))


def loss_est(t_hat_std, t_std):
    return G.mse(t_hat_std, t_std)


def discriminator_loss(d_real, d_fake):
    """``-[log D(v, t) + log(1 - D(v, t_hat))]`` with clamped probabilities."""
    ones = np.ones(d_real.shape)
    zeros = np.zeros(d_fake.shape)
    return G.add(G.binary_cross_entropy(d_real, ones), G.binary_cross_entropy(d_fake, zeros))


def generator_loss(d_fake, t_fake_std, t_real_std):
    """Non-saturating ``-log D(v, t_hat)`` plus the L2 distance ``||t_hat - t||``."""
    adv = G.binary_cross_entropy(d_fake, np.ones(d_fake.shape))
    dist = G.l2_norm(G.sub(t_fake_std, t_real_std), axis=-1)
    return G.add(adv, G.mean(dist))


def loss_adversarial(model, images, t_real_std, t_fake_std):
    """Both sides of the adversarial objective for one batch.

    Returns ``(d_loss, g_loss)``. ``d_loss`` uses a detached fake so it does
    not reach the generator; ``g_loss`` uses detached discriminator features.
    """
    feats = model.F_d(images)
    d_real = model.discriminate(feats, G.as_tensor(t_real_std))
    d_fake_detached = model.discriminate(feats, t_fake_std.detach() if isinstance(t_fake_std, G.Tensor)
                                         else G.Tensor(t_fake_std))
    d_loss = discriminator_loss(d_real, d_fake_detached)
    g_fake = model.discriminate(feats.detach(), G.as_tensor(t_fake_std))
    g_loss = generator_loss(g_fake, G.as_tensor(t_fake_std), G.as_tensor(t_real_std))
    return d_loss, g_loss


def loss_class(logits, labels, num_classes=None):
    labels = np.asarray(labels).reshape(-1)
    k = num_classes if num_classes is not None else logits.shape[-1]
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"labels must lie in [0, {k})")
    if len(logits.shape) == 1:
        logits = G.reshape(logits, (1, -1))
    return G.cross_entropy(logits, labels)


def total_loss(parts, weights):
    """``est + l1 * emb + l2 * adv + l3 * class``; parts may be floats or Tensors."""
    est, emb, adv, cls = parts
    terms = [(1.0, est), (weights.embedding, emb), (weights.adversarial, adv), (weights.classification, cls)]
    if all(not isinstance(p, G.Tensor) for _, p in terms):
        for _, p in terms:
            if not np.isfinite(p):
                raise G.NumericError("total_loss: non-finite component")
        return float(est) + weights.embedding * float(emb) + weights.adversarial * float(adv) \
            + weights.classification * float(cls)
    out = G.as_tensor(est)
    for w, p in terms[1:]:
        if w == 0.0 or p is None:
            continue
        out = G.add(out, G.mul(G.as_tensor(p), w))
    return out

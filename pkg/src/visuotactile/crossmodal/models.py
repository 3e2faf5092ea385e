"""Networks of the single-image cross-modal estimator and the regression baseline."""

import numpy as np

from .. import gradcore as G
from ..gradcore import MLP, ConvEncoder, Module, Tensor

TACTILE_SCALE = 100.0


class Standardizer:
    """Per-column z-scoring with statistics taken from the training split."""

    def __init__(self, mean, std):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.std = np.maximum(np.asarray(std, dtype=np.float64), 1e-6)

    @classmethod
    def fit(cls, values):
        values = np.asarray(values, dtype=np.float64)
        return cls(values.mean(axis=0), values.std(axis=0))

    def forward(self, values):
        return (np.asarray(values, dtype=np.float64) - self.mean) / self.std

    def inverse(self, z):
        return np.asarray(z, dtype=np.float64) * self.std + self.mean

    def tensor(self, t):
        """Differentiable standardization of a Tensor of raw values."""
        return G.mul(G.sub(t, self.mean.astype(np.float32)), (1.0 / self.std).astype(np.float32))


def check_tactile(t):
    t = np.asarray(t, dtype=np.float64)
    if t.shape[-1] != 15:
        raise G.ShapeError(f"tactile vectors must have 15 entries, got shape {t.shape}")
    if np.any(~np.isfinite(t)) or np.any(t < 0) or np.any(t > 100):
        raise ValueError("tactile values must lie in [0, 100]")
    return t


def check_images(images):
    images = np.asarray(images)
    if images.ndim == 3:
        images = images[None]
    if images.ndim != 4 or images.shape[-1] != 3:
        raise G.ShapeError(f"images must be (N, H, W, 3) or (H, W, 3), got {images.shape}")
    return images


class CrossModalModel(Module):
    """Visual encoder, tactile encoder, generator, joint classifier, discriminator.

    ``out_dim`` is 15 in joint mode or 1 when a single property is estimated.
    The discriminator sees ``concat(F_d(image), standardized tactile)``.
    """

    def __init__(self, out_dim, rng, latent_dim=50, num_classes=6, hidden=64,
                 channels=(8, 16, 32), disc_channels=(4, 8, 16), disc_feature_dim=16):
        self.out_dim = out_dim
        self.latent_dim = latent_dim
        self.num_classes = num_classes
        self.E_v = ConvEncoder(latent_dim, rng, channels)
        self.E_t = MLP([15, hidden, latent_dim], rng)
        self.G_t = MLP([latent_dim, hidden, out_dim], rng)
        self.C_vt = MLP([latent_dim, hidden, num_classes], rng)
        self.F_d = ConvEncoder(disc_feature_dim, rng, disc_channels)
        self.D = MLP([disc_feature_dim + out_dim, hidden, 1], rng)

    def generator_parameters(self):
        named = self.named_parameters()
        return {k: v for k, v in named.items() if not k.startswith(("D.", "F_d."))}

    def discriminator_parameters(self):
        named = self.named_parameters()
        return {k: v for k, v in named.items() if k.startswith(("D.", "F_d."))}

    def embed_visual(self, images):
        return self.E_v(check_images(images))

    def embed_tactile(self, t_std):
        return self.E_t(t_std)

    def generate(self, e_v):
        """Tactile estimate in raw units: ``100 * sigmoid(G_t(e_v))``."""
        if e_v.shape[-1] != self.latent_dim:
            raise G.ShapeError(f"latent must have {self.latent_dim} dims, got {e_v.shape}")
        return G.mul(G.sigmoid(self.G_t(e_v)), TACTILE_SCALE)

    def classify(self, e_v):
        return self.C_vt(e_v)

    def discriminate(self, features, t_std):
        return G.sigmoid(self.D(G.concat([features, t_std], axis=-1)))


class RegressionModel(Module):
    """Image encoder mapped straight to the tactile output (no shared latent)."""

    def __init__(self, out_dim, rng, channels=(8, 16, 32)):
        self.out_dim = out_dim
        self.E = ConvEncoder(out_dim, rng, channels)

    def generator_parameters(self):
        return self.named_parameters()

    def predict_raw(self, images):
        return G.mul(G.sigmoid(self.E(check_images(images))), TACTILE_SCALE)


def predict(model, images, batch_size=64):
    """Raw-unit tactile estimates for a stack of single images."""
    images = check_images(images)
    out = []
    for i in range(0, len(images), batch_size):
        chunk = images[i:i + batch_size]
        if isinstance(model, CrossModalModel):
            out.append(model.generate(model.embed_visual(chunk)).data.astype(np.float64))
        else:
            out.append(model.predict_raw(chunk).data.astype(np.float64))
    return np.concatenate(out, axis=0)


def estimate(model, e_v):
    e_v = e_v if isinstance(e_v, Tensor) else Tensor(e_v)
    return model.generate(e_v).data.astype(np.float64)


def embed_visual(model, image):
    return model.embed_visual(image).data.astype(np.float64)


def embed_tactile(model, t, standardizer):
    t = check_tactile(t)
    return model.embed_tactile(Tensor(standardizer.forward(t))).data.astype(np.float64)

"""Late-fusion multi-view estimators."""

import numpy as np

from .. import gradcore as G
from ..gradcore import MLP, ConvEncoder, Module, Tensor

TACTILE_SCALE = 100.0
FUSION_MODES = ("concat", "maxpool")


def fuse_views(features, mode):
    """Fuse a list of per-view feature vectors (arrays or Tensors)."""
    if not len(features):
        raise ValueError("need at least one view")
    if mode == "concat":
        return G.concat(list(features), axis=-1)
    if mode == "maxpool":
        return G.max_stack(list(features))
    raise ValueError(f"unknown fusion mode {mode!r}; expected one of {FUSION_MODES}")


def _split_views(feats):
    """(B, M, L) Tensor -> list of M (B, L) Tensors."""
    return [G.index(feats, (slice(None), m)) for m in range(feats.shape[1])]


class MultiViewEstimator(Module):
    """Shared per-view encoder, late fusion, MLP head producing values in [0, 100]."""

    def __init__(self, M, out_dim, rng, latent_dim=100, fusion="concat", hidden=64, channels=(8, 16, 32)):
        if fusion not in FUSION_MODES:
            raise ValueError(f"unknown fusion mode {fusion!r}")
        self.M, self.out_dim, self.latent_dim, self.fusion = M, out_dim, latent_dim, fusion
        self.encoder = ConvEncoder(latent_dim, rng, channels)
        width = M * latent_dim if fusion == "concat" else latent_dim
        self.head = MLP([width, hidden, out_dim], rng)

    def head_parameters(self):
        return {k: v for k, v in self.named_parameters().items() if k.startswith("head.")}

    def encode(self, views):
        """(B, M, H, W, 3) images -> (B, M, L) features."""
        views = np.asarray(views)
        b, m = views.shape[:2]
        flat = self.encoder(views.reshape((b * m,) + views.shape[2:]))
        return G.reshape(flat, (b, m, self.latent_dim))

    def head_forward(self, feats):
        feats = feats if isinstance(feats, Tensor) else Tensor(feats)
        if feats.shape[1] != self.M:
            raise G.ShapeError(f"expected {self.M} views, got {feats.shape[1]}")
        fused = fuse_views(_split_views(feats), self.fusion)
        return G.mul(G.sigmoid(self.head(fused)), TACTILE_SCALE)

    def forward(self, views):
        return self.head_forward(self.encode(views))


class TRNEstimator(Module):
    """Relation-style heads, one per subset size, over concatenated view features."""

    def __init__(self, max_size, out_dim, rng, latent_dim=100, hidden=64, channels=(8, 16, 32)):
        self.max_size, self.out_dim, self.latent_dim = max_size, out_dim, latent_dim
        self.encoder = ConvEncoder(latent_dim, rng, channels)
        self.heads = [MLP([k * latent_dim, hidden, out_dim], rng) for k in range(2, max_size + 1)]

    def forward(self, views):
        views = np.asarray(views)
        b, k = views.shape[:2]
        if not 2 <= k <= self.max_size:
            raise G.ShapeError(f"subset size {k} outside [2, {self.max_size}]")
        flat = self.encoder(views.reshape((b * k,) + views.shape[2:]))
        fused = G.reshape(flat, (b, k * self.latent_dim))
        return G.mul(G.sigmoid(self.heads[k - 2](fused)), TACTILE_SCALE)

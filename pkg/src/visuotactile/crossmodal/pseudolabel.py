"""Visuo-tactile pseudo-labels: PCA on image features, z-scoring, k-means."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class PCA:
    mean: np.ndarray
    components: np.ndarray  # (d, features), orthonormal rows

    @classmethod
    def fit(cls, x, d):
        x = np.asarray(x, dtype=np.float64)
        d = min(d, x.shape[0], x.shape[1])
        mean = x.mean(axis=0)
        _, _, vt = np.linalg.svd(x - mean, full_matrices=False)
        comps = vt[:d]
        # deterministic sign: largest-magnitude loading positive
        signs = np.sign(comps[np.arange(d), np.abs(comps).argmax(axis=1)])
        signs[signs == 0] = 1.0
        return cls(mean, comps * signs[:, None])

    def transform(self, x):
        return (np.asarray(x, dtype=np.float64) - self.mean) @ self.components.T

    def reconstruct(self, z):
        return z @ self.components + self.mean


def kmeans_pp_init(x, k, rng):
    n = x.shape[0]
    centers = [x[rng.integers(n)]]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers.append(x[idx])
        d2 = np.minimum(d2, np.sum((x - x[idx]) ** 2, axis=1))
    return np.array(centers)


def _assign(x, centers):
    d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)  # ties -> lowest index
    return labels, d2[np.arange(len(x)), labels]


@dataclass
class KMeansResult:
    centers: np.ndarray
    labels: np.ndarray
    inertia_history: list = field(default_factory=list)

    @property
    def inertia(self):
        return self.inertia_history[-1]


def kmeans(x, k, seed=0, max_iter=100, tol=1e-6):
    """k-means++ seeding followed by Lloyd iterations.

    Stops after ``max_iter`` iterations or when the relative change in
    inertia drops below ``tol``. A cluster that empties is re-seeded at the
    point farthest from its current centre.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if k < 1 or k > n:
        raise ValueError(f"k={k} must lie in [1, {n}]")
    rng = np.random.default_rng(seed)
    centers = kmeans_pp_init(x, k, rng)
    labels, d2 = _assign(x, centers)
    history = [float(d2.sum())]
    for _ in range(max_iter):
        new = centers.copy()
        for j in range(k):
            members = labels == j
            if members.any():
                new[j] = x[members].mean(axis=0)
        labels, d2 = _assign(x, new)
        for j in range(k):
            if not np.any(labels == j):
                far = int(d2.argmax())
                new[j] = x[far]
                labels, d2 = _assign(x, new)
        centers = new
        inertia = float(d2.sum())
        prev = history[-1]
        history.append(inertia)
        if prev == 0 or abs(prev - inertia) / prev < tol:
            break
    return KMeansResult(centers, labels, history)


@dataclass
class PseudoLabeler:
    pca: PCA
    feature_stats: tuple  # (mean, std) of PCA-reduced features
    tactile_stats: tuple  # (mean, std) of the tactile vectors
    centers: np.ndarray

    @property
    def k(self):
        return len(self.centers)

    def representation(self, features, tactile):
        z = self.pca.transform(features)
        z = (z - self.feature_stats[0]) / self.feature_stats[1]
        t = (np.asarray(tactile, dtype=np.float64) - self.tactile_stats[0]) / self.tactile_stats[1]
        return np.concatenate([z, t], axis=1)

    def assign(self, features, tactile):
        return _assign(self.representation(features, tactile), self.centers)[0]

    def to_arrays(self):
        return {
            "pca_mean": self.pca.mean, "pca_components": self.pca.components,
            "feat_mean": self.feature_stats[0], "feat_std": self.feature_stats[1],
            "tact_mean": self.tactile_stats[0], "tact_std": self.tactile_stats[1],
            "centers": self.centers,
        }

    @classmethod
    def from_arrays(cls, a):
        return cls(PCA(a["pca_mean"], a["pca_components"]), (a["feat_mean"], a["feat_std"]),
                   (a["tact_mean"], a["tact_std"]), a["centers"])


def _safe_std(x):
    s = x.std(axis=0)
    return np.where(s > 1e-12, s, 1.0)


def build_pseudo_labels(features, tactile, d_pca=30, k=6, seed=0):
    """Cluster concatenated (PCA-reduced image features, tactile vector).

    ``features`` are per-sample image features (one view per sample);
    ``tactile`` the matching 15-vectors. Returns ``(labels, labeler, result)``.
    """
    features = np.asarray(features, dtype=np.float64)
    tactile = np.asarray(tactile, dtype=np.float64)
    if len(features) != len(tactile):
        raise ValueError("features and tactile vectors must pair up")
    if k > len(features):
        raise ValueError(f"k={k} exceeds the {len(features)} available samples")
    pca = PCA.fit(features, d_pca)
    z = pca.transform(features)
    fstats = (z.mean(axis=0), _safe_std(z))
    tstats = (tactile.mean(axis=0), _safe_std(tactile))
    labeler = PseudoLabeler(pca, fstats, tstats, np.zeros((k, 1)))
    rep = labeler.representation(features, tactile)
    # cluster in a canonical row order so the input order cannot matter
    order = np.lexsort(rep.T[::-1])
    result = kmeans(rep[order], k, seed=seed)
    labels = np.empty_like(result.labels)
    labels[order] = result.labels
    result.labels = labels
    labeler.centers = result.centers
    return labels, labeler, result

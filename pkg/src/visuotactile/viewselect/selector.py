"""Categorical viewpoint selectors trained with REINFORCE."""

import numpy as np

from ..gradcore import sample_categorical


def softmax_rows(z):
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


class SelectorBank:
    """``M`` independent logit rows over ``N`` viewpoints (repeats allowed)."""

    def __init__(self, z):
        z = np.array(z, dtype=np.float64, ndmin=2)
        if z.ndim != 2 or z.shape[0] < 1 or z.shape[1] < 1:
            raise ValueError(f"selector logits must be a non-empty M x N matrix, got {z.shape}")
        self.z = z

    @classmethod
    def uniform(cls, M, N):
        return cls(np.zeros((M, N)))

    @property
    def M(self):
        return self.z.shape[0]

    @property
    def N(self):
        return self.z.shape[1]

    def probabilities(self):
        return softmax_rows(self.z)

    def copy(self):
        return SelectorBank(self.z.copy())

    def __repr__(self):
        return f"SelectorBank(M={self.M}, N={self.N})"


def select_deterministic(bank):
    """Per-row argmax of the softmax; ties go to the lowest index."""
    if not np.all(np.isfinite(bank.z)):
        raise ValueError("selector logits must be finite")
    return bank.probabilities().argmax(axis=1)


def select_stochastic(bank, rng):
    return np.array([sample_categorical(p, rng) for p in bank.probabilities()], dtype=np.int64)


def log_prob_grad(bank, q):
    """d log pi(q) / dz, one row per selector: onehot(q_m) - softmax(z_m)."""
    q = np.asarray(q, dtype=np.int64).reshape(-1)
    if q.size != bank.M or q.min() < 0 or q.max() >= bank.N:
        raise ValueError(f"q must hold {bank.M} indices in [0, {bank.N})")
    g = -bank.probabilities()
    g[np.arange(bank.M), q] += 1.0
    return g


def reinforce_update(bank, q, reward, baseline, lr):
    """Return a new bank moved along ``(reward - baseline) * grad log pi(q)``."""
    if not np.isfinite(reward) or not np.isfinite(baseline):
        raise ValueError("reward and baseline must be finite")
    return SelectorBank(bank.z + lr * (reward - baseline) * log_prob_grad(bank, q))


class EMABaseline:
    """Exponential moving average of rewards; starts at the first reward."""

    def __init__(self, decay=0.9):
        self.decay = decay
        self.value = None

    def current(self, reward):
        return reward if self.value is None else self.value

    def update(self, reward):
        self.value = reward if self.value is None else self.decay * self.value + (1 - self.decay) * reward
        return self.value

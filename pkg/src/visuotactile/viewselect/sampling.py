"""Non-learned view sampling baselines."""

from dataclasses import dataclass

import numpy as np


def sample_random(N, M, rng):
    return rng.integers(0, N, size=M)


def _round_half_away(x):
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def sample_equidistant(N, M):
    if M < 1 or N < 1:
        raise ValueError("N and M must be positive")
    if M == 1:
        return np.array([(N - 1) // 2])
    m = np.arange(M, dtype=np.float64)
    return _round_half_away(m * (N - 1) / (M - 1)).astype(np.int64)


@dataclass
class TRNConfig:
    max_size: int = 3
    num_subsets: int = 8


def sample_trn_subset(N, max_size, rng):
    """One sorted subset of distinct views with size uniform in {2..max_size}."""
    hi = min(max_size, N)
    if hi < 2:
        raise ValueError("subsets need at least two available views")
    k = int(rng.integers(2, hi + 1))
    return np.sort(rng.choice(N, size=k, replace=False))


def sample_trn_subsets(N, config, rng):
    return [sample_trn_subset(N, config.max_size, rng) for _ in range(config.num_subsets)]

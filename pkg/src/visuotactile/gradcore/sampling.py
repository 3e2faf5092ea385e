import numpy as np


def sample_categorical(probabilities, rng):
    """Draw one index from a discrete distribution.

    Uses a single uniform draw and the cumulative sum, so the result is a
    deterministic function of the generator state.
    """
    p = np.asarray(probabilities, dtype=np.float64).reshape(-1)
    if p.size == 0 or not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ValueError("probabilities must be finite and nonnegative")
    if abs(p.sum() - 1.0) > 1e-6:
        raise ValueError(f"probabilities sum to {p.sum()!r}, expected 1")
    cdf = np.cumsum(p)
    u = rng.random() * cdf[-1]
    return min(int(np.searchsorted(cdf, u, side="right")), p.size - 1)

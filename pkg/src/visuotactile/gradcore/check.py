"""Finite-difference verification of analytic gradients."""

import numpy as np

from .tensor import backward, precision


def gradient_check(loss_fn, param, epsilon=1e-4, dtype=np.float64, max_entries=None, rng=None):
    """Compare backprop against central differences for one parameter.

    ``loss_fn`` is a zero-argument callable that rebuilds the graph and
    returns a scalar Tensor depending on ``param``. The check runs with
    ``dtype`` storage (float64 by default) so rounding does not swamp the
    comparison; the parameter's original data is restored afterwards.

    Returns ``max |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)``.
    With ``max_entries`` only a random subset of entries is perturbed.
    """
    if not 1e-5 <= epsilon <= 1e-2:
        raise ValueError("epsilon must lie in [1e-5, 1e-2]")
    original = param.data
    saved_grad = param.grad
    try:
        with precision(dtype):
            param.data = original.astype(dtype)
            param.grad = None
            loss = loss_fn()
            backward(loss)
            analytic = (np.zeros(param.shape) if param.grad is None
                        else np.asarray(param.grad, dtype=np.float64))
            flat = param.data.reshape(-1)
            idx = np.arange(flat.size)
            if max_entries is not None and flat.size > max_entries:
                rng = rng or np.random.default_rng(0)
                idx = rng.choice(flat.size, size=max_entries, replace=False)
            worst = 0.0
            for i in idx:
                keep = flat[i]
                flat[i] = keep + epsilon
                up = float(loss_fn().data)
                flat[i] = keep - epsilon
                down = float(loss_fn().data)
                flat[i] = keep
                numeric = (up - down) / (2.0 * epsilon)
                a = analytic.reshape(-1)[i]
                denom = max(abs(a), abs(numeric), 1e-8)
                worst = max(worst, abs(a - numeric) / denom)
    finally:
        param.data = original
        param.grad = saved_grad
    return worst

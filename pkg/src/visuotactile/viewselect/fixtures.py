"""Constructed datasets with a known informative view."""

import numpy as np

from ..synthsps.dataset import ArrayDataset, split_ids
from ..synthsps.generator import view_angles


def single_view_signal_dataset(num_samples=160, num_views=10, signal_view=5, size=16, seed=0):
    """Only ``signal_view`` depends on the target (column 0); every other view is noise.

    The informative view is a flat patch whose brightness tracks the target;
    the remaining views are i.i.d. uniform pixels.
    """
    rng = np.random.default_rng([seed, 0x51A1])
    t = rng.uniform(5.0, 95.0, size=(num_samples, 15))
    images = rng.random((num_samples, num_views, size, size, 3)).astype(np.float32)
    level = (t[:, 0] / 100.0)[:, None, None, None]
    images[:, signal_view] = np.clip(level + 0.02 * rng.standard_normal((num_samples, size, size, 3)), 0, 1)
    meas = np.repeat(t[:, None, :], 5, axis=1).astype(np.float32)
    train, val = split_ids(num_samples, seed)
    return ArrayDataset(images, view_angles(num_views).astype(np.float32), meas,
                        np.asarray(train, dtype=np.int64), np.asarray(val, dtype=np.int64))

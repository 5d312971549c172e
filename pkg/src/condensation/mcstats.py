"""Batch-means error estimates for time averages."""
from __future__ import annotations

import math

import numpy as np

DEFAULT_BATCHES = 32


def batch_means(batch_values, axis=0):
    """Mean and standard error from equal-length batch averages.

    ``batch_values`` has one entry (or row) per batch along ``axis``.
    """
    vals = np.asarray(batch_values, dtype=float)
    b = vals.shape[axis]
    if b < 2:
        raise ValueError("need at least two batches")
    mean = vals.mean(axis=axis)
    se = vals.std(axis=axis, ddof=1) / math.sqrt(b)
    return mean, se


def batch_means_series(samples, n_batches=DEFAULT_BATCHES):
    """Batch-means estimate for an equally spaced series; trailing samples are dropped."""
    x = np.asarray(samples, dtype=float)
    size = len(x) // n_batches
    if size == 0:
        raise ValueError("fewer samples than batches")
    return batch_means(x[: size * n_batches].reshape(n_batches, size).mean(axis=1))

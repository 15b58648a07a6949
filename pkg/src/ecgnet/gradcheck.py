"""Central finite-difference harness for verifying backward passes."""

from __future__ import annotations

import numpy as np


def numeric_gradient(scalar_fn, array, epsilon=1e-5):
    """Central differences of ``scalar_fn`` w.r.t. every entry of ``array``.

    The array is perturbed in place and restored; ``scalar_fn`` takes no
    arguments and must read the current array contents.
    """
    grad = np.zeros_like(array, dtype=np.float64)
    flat = array.reshape(-1)
    if not np.shares_memory(flat, array):
        raise ValueError("array must be contiguous so in-place probes reach scalar_fn")
    gflat = grad.reshape(-1)
    for j in range(flat.size):
        orig = flat[j]
        flat[j] = orig + epsilon
        f_plus = scalar_fn()
        flat[j] = orig - epsilon
        f_minus = scalar_fn()
        flat[j] = orig
        gflat[j] = (f_plus - f_minus) / (2.0 * epsilon)
    return grad


def max_relative_error(analytic, numeric):
    """max over entries of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float((np.abs(analytic - numeric) / denom).max())


def grad_check(scalar_fn, arrays, analytic_grads, epsilon=1e-5):
    """Compare analytic gradients against central differences.

    ``arrays`` and ``analytic_grads`` are parallel sequences; each array is
    perturbed coordinate-wise through ``scalar_fn``.  Returns the worst
    relative error over everything.  Raises on non-finite values so a broken
    backward cannot hide behind NaN comparisons.
    """
    arrays = list(arrays)
    analytic_grads = list(analytic_grads)
    if len(arrays) != len(analytic_grads):
        raise ValueError("arrays and analytic_grads must pair up")
    worst = 0.0
    for arr, ana in zip(arrays, analytic_grads):
        if arr.shape != np.shape(ana):
            raise ValueError(f"gradient shape {np.shape(ana)} does not match value {arr.shape}")
        num = numeric_gradient(scalar_fn, arr, epsilon)
        if not np.isfinite(num).all() or not np.isfinite(ana).all():
            raise FloatingPointError("non-finite values encountered during gradient check")
        worst = max(worst, max_relative_error(ana, num))
    return worst

"""Small input-validation helpers shared by the estimator, CLI and kernels."""

import numpy as np


def as_float_matrix(x, name="X"):
    """Coerce to a 2D float64 array of shape (n_samples, n_features)."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2D (n_samples, n_features), got ndim={arr.ndim}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"{name} must be non-empty, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    return arr


def as_label_vector(y, n_rows, name="y"):
    """Coerce to a 1D integer label array aligned with ``n_rows`` samples."""
    arr = np.asarray(y)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1D, got ndim={arr.ndim}")
    if arr.shape[0] != n_rows:
        raise ValueError(f"{name} has {arr.shape[0]} entries, expected {n_rows}")
    return arr


def as_batch(x, input_len, name="batch"):
    """Coerce to the (batch, 1, input_len) layout the network consumes.

    Accepts (n, input_len) or (n, 1, input_len); anything else is rejected.
    """
    arr = np.asarray(x)
    if arr.ndim == 2:
        arr = arr[:, None, :]
    if arr.ndim != 3 or arr.shape[1] != 1:
        raise ValueError(f"{name} must have shape (n, {input_len}) or (n, 1, {input_len})")
    if arr.shape[2] != input_len:
        raise ValueError(
            f"{name} length {arr.shape[2]} does not match model input_len {input_len}"
        )
    return arr

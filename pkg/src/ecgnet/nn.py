"""Differentiable 1D layer kernels with hand-written backward passes.

Every forward that needs one returns ``(output, cache)``; the matching
backward consumes the cache and returns exact gradients.  Arrays follow the
(batch, channel, length) layout and keep whatever float dtype they are given,
so tests can run the same kernels in float64 for tight gradient checks.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


# ---------------------------------------------------------------------------
# activations


def relu(x):
    return np.maximum(x, 0)


def relu_backward(x, grad_out):
    """Subgradient convention: zero gradient where x <= 0."""
    return grad_out * (x > 0)


def sigmoid(x):
    # Split by sign so large |x| never overflows exp.
    out = np.empty_like(x, dtype=np.result_type(x, np.float32))
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# ---------------------------------------------------------------------------
# convolution


def conv1d_forward(x, w, b, padding="same"):
    """Cross-correlation of (B, Cin, L) with kernels (Cout, Cin, K) plus bias.

    ``same`` zero-pads so the output length equals L; ``valid`` requires
    L >= K and yields L - K + 1.
    """
    batch, c_in, length = x.shape
    c_out, c_in_w, klen = w.shape
    if c_in != c_in_w:
        raise ValueError(f"conv1d: input has {c_in} channels, kernel expects {c_in_w}")
    if padding == "same":
        pad_left = (klen - 1) // 2
        pad_right = klen - 1 - pad_left
        xp = np.pad(x, ((0, 0), (0, 0), (pad_left, pad_right)))
    elif padding == "valid":
        if length < klen:
            raise ValueError(f"conv1d: length {length} shorter than kernel {klen} (valid mode)")
        pad_left = pad_right = 0
        xp = x
    else:
        raise ValueError(f"conv1d: unknown padding {padding!r}")
    l_out = xp.shape[2] - klen + 1
    # im2col: (B, Cin, Lout, K) -> (B*Lout, Cin*K) so the product is one GEMM.
    cols = sliding_window_view(xp, klen, axis=2)
    cols = np.ascontiguousarray(cols.transpose(0, 2, 1, 3)).reshape(batch * l_out, c_in * klen)
    out = cols @ w.reshape(c_out, c_in * klen).T + b
    out = out.reshape(batch, l_out, c_out).transpose(0, 2, 1)
    cache = (cols, w, x.shape, xp.shape[2], pad_left, l_out)
    return np.ascontiguousarray(out), cache


def conv1d_backward(grad_out, cache):
    """Gradients of conv1d_forward w.r.t. input, weights and bias."""
    cols, w, x_shape, padded_len, pad_left, l_out = cache
    batch, c_in, length = x_shape
    c_out, _, klen = w.shape
    if grad_out.shape != (batch, c_out, l_out):
        raise ValueError(
            f"conv1d backward: grad shape {grad_out.shape} does not match output "
            f"{(batch, c_out, l_out)}"
        )
    gy = np.ascontiguousarray(grad_out.transpose(0, 2, 1)).reshape(batch * l_out, c_out)
    grad_b = gy.sum(axis=0)
    grad_w = (gy.T @ cols).reshape(c_out, c_in, klen)
    dcols = (gy @ w.reshape(c_out, c_in * klen)).reshape(batch, l_out, c_in, klen)
    dcols = dcols.transpose(0, 2, 1, 3)  # (B, Cin, Lout, K)
    dxp = np.zeros((batch, c_in, padded_len), dtype=grad_out.dtype)
    for k in range(klen):
        dxp[:, :, k : k + l_out] += dcols[:, :, :, k]
    grad_x = dxp[:, :, pad_left : pad_left + length]
    return grad_x, grad_w, grad_b


# ---------------------------------------------------------------------------
# pooling


def maxpool1d(x, window=2, stride=2):
    """Max over sliding windows; returns the pooled tensor and argmax indices.

    The indices are absolute positions along the length axis, kept for
    routing gradients in the backward pass.
    """
    batch, channels, length = x.shape
    if length < window:
        raise ValueError(f"maxpool1d: length {length} shorter than window {window}")
    l_out = (length - window) // stride + 1
    wins = sliding_window_view(x, window, axis=2)[:, :, ::stride][:, :, :l_out]
    out = wins.max(axis=3)
    idx = wins.argmax(axis=3) + np.arange(l_out) * stride
    return out, idx


def maxpool1d_backward(grad_out, idx, input_shape):
    """Route each output gradient to the argmax position of its window."""
    batch, channels, length = input_shape
    grad_x = np.zeros(input_shape, dtype=grad_out.dtype)
    bi = np.arange(batch)[:, None, None]
    ci = np.arange(channels)[None, :, None]
    np.add.at(grad_x, (bi, ci, idx), grad_out)
    return grad_x


# ---------------------------------------------------------------------------
# squeeze-and-excitation


def se_squeeze(u):
    """Collapse each channel to its global average over the length axis."""
    return u.mean(axis=2)


def se_squeeze_backward(grad_z, input_shape):
    length = input_shape[2]
    return np.broadcast_to(grad_z[:, :, None] / length, input_shape).astype(grad_z.dtype, copy=True)


def se_excite(z, w1, w2):
    """Two bias-free dense maps with ReLU between and sigmoid gating on top.

    z is (B, C); w1 is (C/r, C); w2 is (C, C/r); the result s lies in (0, 1).
    """
    if z.shape[1] != w1.shape[1]:
        raise ValueError(f"se_excite: z has {z.shape[1]} channels, w1 expects {w1.shape[1]}")
    if w2.shape[1] != w1.shape[0] or w2.shape[0] != w1.shape[1]:
        raise ValueError(f"se_excite: w1 {w1.shape} and w2 {w2.shape} are inconsistent")
    pre1 = z @ w1.T
    hidden = relu(pre1)
    s = sigmoid(hidden @ w2.T)
    return s, (z, pre1, hidden, s, w1, w2)


def se_excite_backward(grad_s, cache):
    z, pre1, hidden, s, w1, w2 = cache
    d_pre2 = grad_s * s * (1.0 - s)
    grad_w2 = d_pre2.T @ hidden
    d_hidden = d_pre2 @ w2
    d_pre1 = relu_backward(pre1, d_hidden)
    grad_w1 = d_pre1.T @ z
    grad_z = d_pre1 @ w1
    return grad_z, grad_w1, grad_w2


def se_scale(u, s):
    """Channel-wise rescaling: every position of channel c is multiplied by s_c."""
    if u.shape[:2] != s.shape:
        raise ValueError(f"se_scale: u channels {u.shape[:2]} do not match s {s.shape}")
    return u * s[:, :, None]


def se_block_forward(u, w1, w2):
    """squeeze -> excite -> scale, preserving the input shape."""
    z = se_squeeze(u)
    s, excite_cache = se_excite(z, w1, w2)
    out = se_scale(u, s)
    return out, (u, s, excite_cache)


def se_block_backward(grad_out, cache):
    u, s, excite_cache = cache
    grad_u = grad_out * s[:, :, None]
    grad_s = (grad_out * u).sum(axis=2)
    grad_z, grad_w1, grad_w2 = se_excite_backward(grad_s, excite_cache)
    grad_u += se_squeeze_backward(grad_z, u.shape)
    return grad_u, grad_w1, grad_w2


# ---------------------------------------------------------------------------
# dense


def dense_forward(x, w, b):
    """Affine map x @ w.T + b with x (B, N), w (M, N), b (M,)."""
    if x.shape[1] != w.shape[1]:
        raise ValueError(f"dense: input width {x.shape[1]} does not match weights {w.shape}")
    return x @ w.T + b, (x, w)


def dense_backward(grad_out, cache):
    x, w = cache
    grad_x = grad_out @ w
    grad_w = grad_out.T @ x
    grad_b = grad_out.sum(axis=0)
    return grad_x, grad_w, grad_b


# ---------------------------------------------------------------------------
# classifier head


def softmax(x):
    """Row-wise softmax, stabilized by max subtraction."""
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(probs, labels):
    """Mean negative log-likelihood plus its gradient w.r.t. the logits.

    ``probs`` are softmax outputs; the returned gradient (probs - onehot) / B
    is the exact derivative of the fused softmax + cross-entropy map.
    """
    batch, k = probs.shape
    labels = np.asarray(labels)
    if labels.shape != (batch,):
        raise ValueError(f"cross_entropy: labels shape {labels.shape}, expected ({batch},)")
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError(f"cross_entropy: label out of range for {k} classes")
    picked = probs[np.arange(batch), labels]
    loss = float(-np.log(picked).mean())
    grad_logits = probs.copy()
    grad_logits[np.arange(batch), labels] -= 1.0
    grad_logits /= batch
    return loss, grad_logits

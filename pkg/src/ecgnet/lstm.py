"""LSTM forward pass and full backpropagation through time.

Parameters are stacked over the four gates in (input, forget, cell, output)
order: wx is (4H, C), wh is (4H, H), b is (4H,).  Input arrives as
(B, C, L) and is read as L timesteps of C features; initial hidden and cell
states are zero.
"""

from __future__ import annotations

import numpy as np

from .nn import sigmoid


def lstm_forward(x, wx, wh, b):
    """Run the recurrence and return (hidden sequence (B,H,L), last hidden, cache)."""
    batch, features, steps = x.shape
    hidden = wh.shape[1]
    if wx.shape != (4 * hidden, features):
        raise ValueError(f"lstm: wx shape {wx.shape}, expected {(4 * hidden, features)}")
    if wh.shape != (4 * hidden, hidden) or b.shape != (4 * hidden,):
        raise ValueError("lstm: recurrent weight or bias shape inconsistent with hidden size")
    h = np.zeros((batch, hidden), dtype=x.dtype)
    c = np.zeros((batch, hidden), dtype=x.dtype)
    h_seq = np.empty((steps, batch, hidden), dtype=x.dtype)
    gates = np.empty((steps, batch, 4 * hidden), dtype=x.dtype)
    cells = np.empty((steps, batch, hidden), dtype=x.dtype)
    cells_prev = np.empty((steps, batch, hidden), dtype=x.dtype)
    hs_prev = np.empty((steps, batch, hidden), dtype=x.dtype)
    xs = x.transpose(2, 0, 1)  # (L, B, C)
    for t in range(steps):
        hs_prev[t] = h
        cells_prev[t] = c
        a = xs[t] @ wx.T + h @ wh.T + b
        i = sigmoid(a[:, :hidden])
        f = sigmoid(a[:, hidden : 2 * hidden])
        g = np.tanh(a[:, 2 * hidden : 3 * hidden])
        o = sigmoid(a[:, 3 * hidden :])
        c = f * c + i * g
        h = o * np.tanh(c)
        gates[t] = np.concatenate([i, f, g, o], axis=1)
        cells[t] = c
        h_seq[t] = h
    cache = (xs, gates, cells, cells_prev, hs_prev, wx, wh)
    return h_seq.transpose(1, 2, 0), h, cache


def lstm_backward(grad_h_seq, grad_h_last, cache):
    """BPTT: gradients w.r.t. input and all stacked parameters.

    grad_h_seq is (B, H, L) or None; grad_h_last is (B, H) or None; at least
    one must be given.
    """
    xs, gates, cells, cells_prev, hs_prev, wx, wh = cache
    steps, batch, features = xs.shape
    hidden = wh.shape[1]
    if grad_h_seq is None and grad_h_last is None:
        raise ValueError("lstm backward: no upstream gradient given")
    gh = (
        np.zeros((steps, batch, hidden), dtype=xs.dtype)
        if grad_h_seq is None
        else grad_h_seq.transpose(2, 0, 1).astype(xs.dtype, copy=True)
    )
    if grad_h_last is not None:
        gh[-1] += grad_h_last
    grad_wx = np.zeros_like(wx)
    grad_wh = np.zeros_like(wh)
    grad_b = np.zeros(4 * hidden, dtype=wx.dtype)
    grad_x = np.empty((steps, batch, features), dtype=xs.dtype)
    dh_next = np.zeros((batch, hidden), dtype=xs.dtype)
    dc_next = np.zeros((batch, hidden), dtype=xs.dtype)
    for t in reversed(range(steps)):
        i = gates[t, :, :hidden]
        f = gates[t, :, hidden : 2 * hidden]
        g = gates[t, :, 2 * hidden : 3 * hidden]
        o = gates[t, :, 3 * hidden :]
        tanh_c = np.tanh(cells[t])
        dh = gh[t] + dh_next
        do = dh * tanh_c
        dc = dh * o * (1.0 - tanh_c**2) + dc_next
        di = dc * g
        dg = dc * i
        df = dc * cells_prev[t]
        dc_next = dc * f
        da = np.concatenate(
            [
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                dg * (1.0 - g**2),
                do * o * (1.0 - o),
            ],
            axis=1,
        )
        grad_wx += da.T @ xs[t]
        grad_wh += da.T @ hs_prev[t]
        grad_b += da.sum(axis=0)
        grad_x[t] = da @ wx
        dh_next = da @ wh
    return grad_x.transpose(1, 2, 0), grad_wx, grad_wh, grad_b

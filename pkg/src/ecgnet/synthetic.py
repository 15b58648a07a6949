"""Seeded synthetic ECG-like fixtures so the pipeline is testable without
licensed clinical data.

Each class gets its own waveform family: a slow sine whose frequency rises
with the class index plus a periodic spike train whose spacing widens with
it, under additive Gaussian noise.  Spike phase is randomized per segment so
classifiers must key on the pattern, not an absolute position.
"""

from __future__ import annotations

import numpy as np


def make_synthetic_segments(num_classes, num_segments, segment_len, noise=0.1, seed=0):
    """Return (values (n, L) float64, labels (n,) int64), classes round-robin."""
    if num_classes < 2:
        raise ValueError("need at least 2 classes")
    if num_segments < num_classes:
        raise ValueError("need at least one segment per class")
    if segment_len < 8:
        raise ValueError("segment_len too short to carry a waveform")
    rng = np.random.default_rng(seed)
    t = np.arange(segment_len)
    x = np.empty((num_segments, segment_len), dtype=np.float64)
    y = np.empty(num_segments, dtype=np.int64)
    for i in range(num_segments):
        cls = i % num_classes
        spacing = 4 + 2 * cls
        phase = int(rng.integers(0, spacing))
        wave = 0.4 * np.sin(2.0 * np.pi * (cls + 1) * t / segment_len)
        wave[phase::spacing] += 1.5
        wave += noise * rng.standard_normal(segment_len)
        x[i] = wave
        y[i] = cls
    return x, y


def parse_synthetic_spec(spec):
    """Parse ``k=5,n=200,len=64,noise=0.1`` into generator keyword arguments."""
    allowed = {"k": int, "n": int, "len": int, "noise": float}
    names = {"k": "num_classes", "n": "num_segments", "len": "segment_len", "noise": "noise"}
    kwargs = {}
    for item in spec.split(","):
        item = item.strip()
        if not item:
            continue
        key, eq, value = item.partition("=")
        key = key.strip()
        if not eq or key not in allowed:
            raise ValueError(f"bad synthetic spec entry {item!r}, keys are {sorted(allowed)}")
        kwargs[names[key]] = allowed[key](value.strip())
    for required in ("num_classes", "num_segments", "segment_len"):
        if required not in kwargs:
            raise ValueError(f"synthetic spec must set k, n and len (missing {required})")
    return kwargs

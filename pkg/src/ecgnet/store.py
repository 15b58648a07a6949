"""Flat binary segment store written by preprocessing and read by training.

Layout: magic ``ECGS``, version u16, normalized flag u8, count u32,
segment length u32, class map (u16 count, then length-prefixed codes in
index order), then count*length little-endian float32 values followed by
count label bytes.  Sequential and mmap-friendly.
"""

from __future__ import annotations

import struct

import numpy as np

from .training import Dataset

MAGIC = b"ECGS"
FORMAT_VERSION = 1


class StoreError(ValueError):
    """Malformed or truncated segment store."""


def write_store(path, x, y, codes, normalized):
    x = np.ascontiguousarray(x, dtype="<f4")
    y = np.asarray(y)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise ValueError("store needs x of shape (n, L) and matching labels")
    if len(codes) > 255:
        raise ValueError("store supports at most 255 classes")
    if y.size and (y.min() < 0 or y.max() >= len(codes)):
        raise ValueError("label out of range for the class map")
    out = bytearray()
    out += MAGIC
    out += struct.pack("<H", FORMAT_VERSION)
    out += struct.pack("<B", 1 if normalized else 0)
    out += struct.pack("<II", x.shape[0], x.shape[1])
    out += struct.pack("<H", len(codes))
    for code in codes:
        encoded = code.encode("utf-8")
        out += struct.pack("<H", len(encoded))
        out += encoded
    out += x.tobytes()
    out += np.asarray(y, dtype=np.uint8).tobytes()
    with open(path, "wb") as fh:
        fh.write(out)


def read_store(path):
    with open(path, "rb") as fh:
        data = fh.read()
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(data):
            raise StoreError(f"{path}: truncated segment store")
        chunk = data[pos : pos + n]
        pos += n
        return chunk

    if take(4) != MAGIC:
        raise StoreError(f"{path}: not a segment store (bad magic)")
    (version,) = struct.unpack("<H", take(2))
    if version != FORMAT_VERSION:
        raise StoreError(f"{path}: store version mismatch: {version} != {FORMAT_VERSION}")
    (normalized,) = struct.unpack("<B", take(1))
    count, seg_len = struct.unpack("<II", take(8))
    (k,) = struct.unpack("<H", take(2))
    codes = []
    for _ in range(k):
        (code_len,) = struct.unpack("<H", take(2))
        codes.append(take(code_len).decode("utf-8"))
    x = np.frombuffer(take(4 * count * seg_len), dtype="<f4").reshape(count, seg_len).copy()
    y = np.frombuffer(take(count), dtype=np.uint8).astype(np.int64)
    if pos != len(data):
        raise StoreError(f"{path}: trailing bytes after segment data")
    return Dataset(x=x, y=y, codes=tuple(codes), normalized=bool(normalized))

"""Binary model checkpoints.

Layout: magic ``SEVL``, format version (u16 LE), length-prefixed config
text block, parameter count (u32 LE), then per-parameter records of
length-prefixed name, rank, dims and raw little-endian float32 data, and a
trailing CRC-32 of all preceding bytes.  Values are stored as float32, so
the save/load round trip is bit-exact for float32 models.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .network import SevggLstm, config_from_mapping, config_to_text, parse_key_values

MAGIC = b"SEVL"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    """Malformed, truncated, corrupt or incompatible checkpoint file."""


def save_checkpoint(model, path):
    """Serialize config and parameters; returns the number of bytes written."""
    out = bytearray()
    out += MAGIC
    out += struct.pack("<H", FORMAT_VERSION)
    cfg_text = config_to_text(model.config).encode("utf-8")
    out += struct.pack("<I", len(cfg_text))
    out += cfg_text
    out += struct.pack("<I", len(model.params))
    for name, value in model.params.items():
        encoded = name.encode("utf-8")
        out += struct.pack("<H", len(encoded))
        out += encoded
        out += struct.pack("<B", value.ndim)
        for dim in value.shape:
            out += struct.pack("<I", dim)
        out += np.ascontiguousarray(value, dtype="<f4").tobytes()
    out += struct.pack("<I", zlib.crc32(bytes(out)) & 0xFFFFFFFF)
    with open(path, "wb") as fh:
        fh.write(out)
    return len(out)


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise CheckpointError("truncated checkpoint file")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))[0]


def load_checkpoint(path):
    """Read a checkpoint back into a float32 ``SevggLstm``."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < len(MAGIC) + 2 + 4:
        raise CheckpointError("truncated checkpoint file")
    body, (stored_crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) & 0xFFFFFFFF != stored_crc:
        raise CheckpointError("checksum failure, checkpoint is corrupt")
    reader = _Reader(body)
    if reader.take(4) != MAGIC:
        raise CheckpointError("not an ecgnet checkpoint (bad magic)")
    version = reader.unpack("<H")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"checkpoint format version mismatch: {version} != {FORMAT_VERSION}")
    cfg_len = reader.unpack("<I")
    cfg_text = reader.take(cfg_len).decode("utf-8")
    config = config_from_mapping(parse_key_values(cfg_text, source=str(path)))
    n_params = reader.unpack("<I")
    params = {}
    for _ in range(n_params):
        name_len = reader.unpack("<H")
        name = reader.take(name_len).decode("utf-8")
        ndim = reader.unpack("<B")
        shape = tuple(reader.unpack("<I") for _ in range(ndim))
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        raw = reader.take(4 * count)
        params[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
    if reader.pos != len(body):
        raise CheckpointError("trailing bytes after parameter records")
    try:
        return SevggLstm(config, params)
    except ValueError as err:
        raise CheckpointError(f"checkpoint inconsistent with its config: {err}") from err

"""ECG record parsing, fixed-window segmentation and amplitude normalization.

A record file is UTF-8 CSV: line 1 ``id,<text>``, line 2 ``rate,<int>``,
line 3 ``n,<int>``, then one sample value per line.  A dataset manifest is a
CSV with header ``record_path,segment_index,label_code`` assigning one class
to each window.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np


class ZeroVarianceError(ValueError):
    """Raised when normalization is attempted with zero standard deviation."""


@dataclass(frozen=True)
class ClassId:
    """One class of the active label scheme: dense index plus letter code."""

    index: int
    code: str


class LabelScheme:
    """Ordered set of class codes; order defines the class indices."""

    def __init__(self, codes):
        codes = tuple(codes)
        if len(codes) == 0:
            raise ValueError("label scheme needs at least one code")
        if len(set(codes)) != len(codes):
            raise ValueError(f"duplicate codes in label scheme: {codes}")
        self.codes = codes
        self._by_code = {c: ClassId(i, c) for i, c in enumerate(codes)}

    @property
    def k(self):
        return len(self.codes)

    def class_id(self, code):
        try:
            return self._by_code[code]
        except KeyError:
            raise ValueError(f"unknown label code {code!r}, scheme has {self.codes}") from None

    def __repr__(self):
        return f"LabelScheme({','.join(self.codes)})"


MIT_BIH = LabelScheme(("N", "V", "L", "R", "A"))
PCCD_2017 = LabelScheme(("N", "A"))


@dataclass
class EcgRecord:
    """One single-lead recording; multi-lead sources store one record per lead."""

    record_id: str
    sampling_rate_hz: int
    samples: np.ndarray
    label_track: str | None = None

    def __post_init__(self):
        if self.sampling_rate_hz <= 0:
            raise ValueError(f"sampling_rate_hz must be positive, got {self.sampling_rate_hz}")
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ValueError("samples must be a non-empty 1D sequence")


@dataclass
class Segment:
    """A fixed-length labelled window, the unit of training and evaluation."""

    source_id: str
    values: np.ndarray
    label: ClassId | None = None
    normalized: bool = False


@dataclass(frozen=True)
class NormStats:
    """Pooled amplitude statistics: mean and population standard deviation."""

    mean: float
    std: float

    def __post_init__(self):
        if self.std < 0:
            raise ValueError(f"std must be nonnegative, got {self.std}")


@dataclass(frozen=True)
class ManifestRow:
    record_path: str
    segment_index: int
    label_code: str


def load_record(path, fmt="csv"):
    """Parse one record file into an ``EcgRecord``.

    Raises ValueError on a malformed header or when the body sample count
    disagrees with the declared ``n``.
    """
    if fmt != "csv":
        raise ValueError(f"unknown record format {fmt!r}")
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if len(lines) < 3:
        raise ValueError(f"{path}: malformed header (need id/rate/n lines)")
    header = {}
    for ln in lines[:3]:
        key, _, value = ln.partition(",")
        header[key.strip()] = value.strip()
    if set(header) != {"id", "rate", "n"}:
        raise ValueError(f"{path}: malformed header, expected id/rate/n, got {sorted(header)}")
    try:
        rate = int(header["rate"])
        declared = int(header["n"])
    except ValueError:
        raise ValueError(f"{path}: malformed header, rate/n must be integers") from None
    body = lines[3:]
    if len(body) != declared:
        raise ValueError(
            f"{path}: sample count mismatch, header declares {declared} but body has {len(body)}"
        )
    try:
        samples = np.array([float(v) for v in body], dtype=np.float64)
    except ValueError:
        raise ValueError(f"{path}: malformed sample value") from None
    return EcgRecord(record_id=header["id"], sampling_rate_hz=rate, samples=samples)


def segment(record, window_seconds=10.0, scheme=None):
    """Cut a record into consecutive non-overlapping windows from sample 0.

    A trailing remainder shorter than one window is dropped; a record shorter
    than one window yields an empty list.  When the record carries a
    per-record ``label_track`` and a scheme is given, every window inherits
    that label; otherwise labels stay unset for the manifest to assign.
    """
    window_len = int(round(window_seconds * record.sampling_rate_hz))
    if window_len < 1:
        raise ValueError(f"window of {window_seconds}s is shorter than one sample")
    label = None
    if record.label_track is not None and scheme is not None:
        label = scheme.class_id(record.label_track)
    n_windows = record.samples.size // window_len
    return [
        Segment(
            source_id=record.record_id,
            values=record.samples[i * window_len : (i + 1) * window_len].copy(),
            label=label,
        )
        for i in range(n_windows)
    ]


def compute_norm_stats(segments):
    """Pool every sample of every given segment and return mean/population std."""
    if not segments:
        raise ValueError("compute_norm_stats needs at least one segment")
    pooled = np.concatenate([np.asarray(s.values, dtype=np.float64) for s in segments])
    if pooled.size == 0:
        raise ValueError("compute_norm_stats needs at least one sample")
    mean = float(pooled.mean())
    std = float(math.sqrt(np.mean((pooled - mean) ** 2)))
    return NormStats(mean=mean, std=std)


def normalize(seg, stats):
    """Return a copy of ``seg`` with every value mapped to (x - mean) / std."""
    if seg.normalized:
        raise ValueError(f"segment from {seg.source_id!r} is already normalized")
    if stats.std == 0:
        raise ZeroVarianceError("cannot normalize with zero standard deviation")
    values = (np.asarray(seg.values, dtype=np.float64) - stats.mean) / stats.std
    return replace(seg, values=values, normalized=True)


def read_manifest(path):
    """Parse the segment-label manifest CSV."""
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty manifest") from None
        if [h.strip() for h in header] != ["record_path", "segment_index", "label_code"]:
            raise ValueError(f"{path}: bad manifest header {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
            try:
                idx = int(row[1])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: segment_index must be an integer") from None
            if idx < 0:
                raise ValueError(f"{path}:{lineno}: segment_index must be nonnegative")
            rows.append(ManifestRow(row[0].strip(), idx, row[2].strip()))
    return rows

"""Confusion matrices and the four evaluation metrics, per class and overall.

Per-class values come from one-vs-rest counts; the overall row is the
unweighted macro average of acc/sen/pre with F1 recomputed as the harmonic
combination of the macro sen and pre.  Degenerate denominators follow the
zero convention (sen or pre is 0 when its denominator is 0; F1 is 0 when
sen + pre is 0), which the text report states in a footnote.
"""

from __future__ import annotations

import io
import csv
from dataclasses import dataclass

import numpy as np

METRIC_NAMES = ("acc", "sen", "pre", "f1")

FOOTNOTE = "sen/pre are 0 when their denominators are 0; f1 is 0 when sen+pre is 0"


@dataclass(frozen=True)
class ClassMetrics:
    acc: float
    sen: float
    pre: float
    f1: float

    def as_tuple(self):
        return (self.acc, self.sen, self.pre, self.f1)


@dataclass(frozen=True)
class MetricReport:
    """Rows of (class code, metrics) in scheme order plus the overall row."""

    classes: tuple
    overall: ClassMetrics


class ConfusionMatrix:
    """K x K counts; rows are true classes, columns are predictions."""

    def __init__(self, counts):
        counts = np.asarray(counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ValueError(f"confusion matrix must be square, got {counts.shape}")
        if (counts < 0).any():
            raise ValueError("confusion matrix entries must be nonnegative")
        self.counts = counts

    @property
    def k(self):
        return self.counts.shape[0]

    @property
    def total(self):
        return int(self.counts.sum())

    def __eq__(self, other):
        return isinstance(other, ConfusionMatrix) and np.array_equal(self.counts, other.counts)

    def __repr__(self):
        return f"ConfusionMatrix({self.counts.tolist()})"


def confusion_matrix(true_labels, predicted_labels, k):
    true_labels = np.asarray(true_labels, dtype=np.int64)
    predicted_labels = np.asarray(predicted_labels, dtype=np.int64)
    if true_labels.shape != predicted_labels.shape or true_labels.ndim != 1:
        raise ValueError("true and predicted labels must be 1D and equal length")
    counts = np.zeros((k, k), dtype=np.int64)
    if true_labels.size:
        if true_labels.min() < 0 or true_labels.max() >= k:
            raise ValueError(f"true label out of range for k={k}")
        if predicted_labels.min() < 0 or predicted_labels.max() >= k:
            raise ValueError(f"predicted label out of range for k={k}")
        np.add.at(counts, (true_labels, predicted_labels), 1)
    return ConfusionMatrix(counts)


def per_class_metrics(cm, class_index):
    """One-vs-rest acc/sen/pre/f1 for a single class."""
    counts = cm.counts
    if not 0 <= class_index < cm.k:
        raise ValueError(f"class index {class_index} out of range for k={cm.k}")
    tp = int(counts[class_index, class_index])
    fn = int(counts[class_index].sum()) - tp
    fp = int(counts[:, class_index].sum()) - tp
    total = cm.total
    tn = total - tp - fn - fp
    acc = (tp + tn) / total if total else 0.0
    sen = tp / (tp + fn) if tp + fn else 0.0
    pre = tp / (tp + fp) if tp + fp else 0.0
    f1 = 2.0 * sen * pre / (sen + pre) if sen + pre else 0.0
    return ClassMetrics(acc=acc, sen=sen, pre=pre, f1=f1)


def macro_overall(per_class):
    """Combine per-class rows into the overall row.

    acc/sen/pre are unweighted means; f1 is the harmonic combination of the
    macro sen and pre.
    """
    per_class = list(per_class)
    if not per_class:
        raise ValueError("macro_overall needs at least one class row")
    acc = float(np.mean([m.acc for m in per_class]))
    sen = float(np.mean([m.sen for m in per_class]))
    pre = float(np.mean([m.pre for m in per_class]))
    f1 = 2.0 * sen * pre / (sen + pre) if sen + pre else 0.0
    return ClassMetrics(acc=acc, sen=sen, pre=pre, f1=f1)


def overall_metrics(cm):
    return macro_overall(per_class_metrics(cm, c) for c in range(cm.k))


def build_report(cm, codes):
    if len(codes) != cm.k:
        raise ValueError(f"{len(codes)} codes for a {cm.k}-class matrix")
    rows = tuple((code, per_class_metrics(cm, i)) for i, code in enumerate(codes))
    return MetricReport(classes=rows, overall=macro_overall(m for _, m in rows))


def format_value(value):
    """Half-up rounding to 3 decimals for rendered reports."""
    from decimal import Decimal, ROUND_HALF_UP

    return str(Decimal(repr(float(value))).quantize(Decimal("0.001"), rounding=ROUND_HALF_UP))


def render_report(report, fmt="text"):
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("class",) + METRIC_NAMES)
        for code, m in report.classes:
            writer.writerow([code] + [format_value(v) for v in m.as_tuple()])
        writer.writerow(["overall"] + [format_value(v) for v in report.overall.as_tuple()])
        return buf.getvalue()
    if fmt == "text":
        lines = [f"{'class':<8}{'acc':>8}{'sen':>8}{'pre':>8}{'f1':>8}"]
        for code, m in report.classes:
            lines.append(f"{code:<8}" + "".join(f"{format_value(v):>8}" for v in m.as_tuple()))
        lines.append(
            f"{'overall':<8}" + "".join(f"{format_value(v):>8}" for v in report.overall.as_tuple())
        )
        lines.append("")
        lines.append(f"note: {FOOTNOTE}")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def parse_report_csv(text):
    """Inverse of ``render_report(..., 'csv')``."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != ["class"] + list(METRIC_NAMES):
        raise ValueError(f"bad report header {header}")
    classes = []
    overall = None
    for row in reader:
        if not row:
            continue
        code, values = row[0], [float(v) for v in row[1:]]
        metrics = ClassMetrics(*values)
        if code == "overall":
            overall = metrics
        else:
            classes.append((code, metrics))
    if overall is None:
        raise ValueError("report has no overall row")
    return MetricReport(classes=tuple(classes), overall=overall)

"""Imbalance-correcting oversampling, k-fold splitting and the fit loop.

Seed discipline inside ``run_cross_validation`` (all derived from
``TrainConfig.seed``, so identical configs give identical runs):

* fold split: ``seed``
* model init for fold f: ``seed + 1 + f``
* oversampling for fold f: ``seed + 1 + k_folds + f``
* batch shuffling for fold f: ``seed + 1 + 2 * k_folds + f``
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .ingest import ZeroVarianceError
from .metrics import build_report, confusion_matrix
from .network import SevggLstm

OPTIMIZERS = ("adam", "sgd")


@dataclass
class Dataset:
    """Segment values (n, L), integer labels (n,) and provenance indices."""

    x: np.ndarray
    y: np.ndarray
    codes: tuple
    normalized: bool = True
    source_indices: np.ndarray | None = None

    def __post_init__(self):
        self.x = np.asarray(self.x)
        self.y = np.asarray(self.y, dtype=np.int64)
        self.codes = tuple(self.codes)
        if self.x.ndim != 2 or self.x.shape[0] != self.y.shape[0]:
            raise ValueError("x must be (n, L) with one label per row")
        if self.y.size and (self.y.min() < 0 or self.y.max() >= len(self.codes)):
            raise ValueError(f"labels out of range for {len(self.codes)} classes")
        if self.source_indices is None:
            self.source_indices = np.arange(len(self.y))
        else:
            self.source_indices = np.asarray(self.source_indices, dtype=np.int64)
            if self.source_indices.shape != self.y.shape:
                raise ValueError("source_indices must align with labels")

    def __len__(self):
        return self.y.shape[0]

    @property
    def k(self):
        return len(self.codes)

    def class_counts(self):
        return np.bincount(self.y, minlength=self.k)

    def subset(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(
            x=self.x[indices],
            y=self.y[indices],
            codes=self.codes,
            normalized=self.normalized,
            source_indices=self.source_indices[indices],
        )


@dataclass(frozen=True)
class FoldSplit:
    fold_index: int
    train_indices: np.ndarray
    test_indices: np.ndarray


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    seed: int = 0
    k_folds: int = 10
    oversample: bool = True
    oversample_scope: str = "train_only"

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate < 0:
            raise ValueError("epochs and batch_size must be positive, learning_rate nonnegative")
        if self.k_folds < 2:
            raise ValueError(f"k_folds must be >= 2, got {self.k_folds}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}, choose from {OPTIMIZERS}")
        if self.oversample_scope not in ("train_only", "all"):
            raise ValueError(f"oversample_scope must be train_only or all, got {self.oversample_scope!r}")


@dataclass
class TrainHistory:
    losses: list = field(default_factory=list)
    accuracies: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# oversampling


def oversample(data, seed):
    """Random oversampling toward the largest class.

    With benchmark count M and class count n: if M >= 2n the whole class is
    replicated to round-half-up(M/n) copies; if n < M < 2n a seeded random
    sample of M - n distinct segments is duplicated once; the benchmark
    class and any class already at M stay untouched.  Duplicates are exact
    copies, and provenance indices follow them.
    """
    if len(data) == 0:
        raise ValueError("cannot oversample an empty dataset")
    counts = data.class_counts()
    n_max = int(counts.max())
    rng = np.random.default_rng(seed)
    pieces = [np.arange(len(data))]
    for cls in range(data.k):
        n_c = int(counts[cls])
        if n_c == 0 or n_c == n_max:
            continue
        members = np.flatnonzero(data.y == cls)
        if n_max >= 2 * n_c:
            multiple = (2 * n_max + n_c) // (2 * n_c)  # round-half-up of n_max / n_c
            pieces.extend(members for _ in range(multiple - 1))
        else:
            extra = n_max - n_c  # == round((n_max/n_c - 1) * n_c)
            chosen = rng.choice(members, size=extra, replace=False)
            pieces.append(np.sort(chosen))
    order = np.concatenate(pieces)
    return data.subset(order)


# ---------------------------------------------------------------------------
# k-fold splitting


def kfold_split(n, k, seed):
    """Shuffle 0..n-1 by seed and partition into k blocks balanced within 1."""
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if n < k:
        raise ValueError(f"cannot split {n} samples into {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    base, remainder = divmod(n, k)
    sizes = [base + 1] * remainder + [base] * (k - remainder)
    bounds = np.cumsum([0] + sizes)
    folds = []
    for i in range(k):
        test = np.sort(perm[bounds[i] : bounds[i + 1]])
        train = np.sort(np.concatenate([perm[: bounds[i]], perm[bounds[i + 1] :]]))
        folds.append(FoldSplit(fold_index=i, train_indices=train, test_indices=test))
    return folds


# ---------------------------------------------------------------------------
# optimizers


def _check_finite_grads(grads):
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise FloatingPointError(f"non-finite gradient for parameter {name!r}")


class Sgd:
    def __init__(self, learning_rate):
        self.learning_rate = learning_rate

    def step(self, params, grads):
        _check_finite_grads(grads)
        for name, g in grads.items():
            params[name] -= self.learning_rate * g


class Adam:
    def __init__(self, learning_rate, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, params, grads):
        _check_finite_grads(grads)
        self.t += 1
        for name, g in grads.items():
            if name not in self.m:
                self.m[name] = np.zeros_like(params[name])
                self.v[name] = np.zeros_like(params[name])
            m = self.m[name]
            v = self.v[name]
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            m_hat = m / (1.0 - self.beta1**self.t)
            v_hat = v / (1.0 - self.beta2**self.t)
            params[name] -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon)


def make_optimizer(name, learning_rate):
    if name == "adam":
        return Adam(learning_rate)
    if name == "sgd":
        return Sgd(learning_rate)
    raise ValueError(f"unknown optimizer {name!r}")


# ---------------------------------------------------------------------------
# fit loop


def train_epoch(model, x, y, optimizer, batch_size, rng):
    """One shuffled pass over (x, y); returns the mean per-sample epoch loss.

    Batch losses are weighted by batch length so a partial last batch does
    not skew the mean; with the null update the epoch loss is then
    independent of the shuffle.
    """
    n = x.shape[0]
    order = rng.permutation(n)
    total = 0.0
    for start in range(0, n, batch_size):
        idx = order[start : start + batch_size]
        loss, bundle = model.loss_and_grads(x[idx][:, None, :], y[idx])
        if not np.isfinite(loss):
            raise FloatingPointError(f"non-finite loss in batch starting at {start}")
        optimizer.step(model.params, bundle.param_grads)
        total += loss * len(idx)
    return total / n


def _accuracy(model, x, y, batch_size=256):
    return float((model.predict(x, batch_size) == y).mean())


def fit_model(model, x, y, cfg, shuffle_rng=None):
    """Train for cfg.epochs and record per-epoch loss and training accuracy."""
    rng = shuffle_rng if shuffle_rng is not None else np.random.default_rng(cfg.seed)
    optimizer = make_optimizer(cfg.optimizer, cfg.learning_rate)
    history = TrainHistory()
    for epoch in range(cfg.epochs):
        try:
            loss = train_epoch(model, x, y, optimizer, cfg.batch_size, rng)
        except FloatingPointError as err:
            raise FloatingPointError(f"epoch {epoch}: {err}") from err
        history.losses.append(loss)
        history.accuracies.append(_accuracy(model, x, y))
    return history


# ---------------------------------------------------------------------------
# cross-validation


@dataclass
class FoldResult:
    fold_index: int
    history: TrainHistory
    confusion: "ConfusionMatrix"
    report: "MetricReport"
    test_indices: np.ndarray
    train_source_indices: np.ndarray
    model: SevggLstm


@dataclass
class CvResult:
    folds: list
    overall: dict


def _normalize_fold(train, test):
    """Per-fold normalization when segments arrive raw: stats from the
    training portion only, applied to both sides."""
    mean = float(train.x.mean())
    std = float(np.sqrt(np.mean((train.x - mean) ** 2)))
    if std == 0:
        raise ZeroVarianceError("training fold has zero variance")
    def apply(ds):
        return replace(ds, x=(ds.x - mean) / std, normalized=True)
    return apply(train), apply(test)


def run_cross_validation(data, model_cfg, train_cfg):
    """Train and evaluate one model per fold; oversampling (when on and
    scoped train_only) touches only the training portion."""
    if model_cfg.input_len != data.x.shape[1]:
        raise ValueError(
            f"model input_len {model_cfg.input_len} does not match segments of "
            f"length {data.x.shape[1]}"
        )
    if model_cfg.num_classes != data.k:
        raise ValueError(f"model has {model_cfg.num_classes} classes, dataset has {data.k}")
    k = train_cfg.k_folds
    if train_cfg.oversample and train_cfg.oversample_scope == "all":
        data = oversample(data, train_cfg.seed + 1 + k)
    splits = kfold_split(len(data), k, train_cfg.seed)
    fold_results = []
    for split in splits:
        f = split.fold_index
        train = data.subset(split.train_indices)
        test = data.subset(split.test_indices)
        if not data.normalized:
            train, test = _normalize_fold(train, test)
        if train_cfg.oversample and train_cfg.oversample_scope == "train_only":
            train = oversample(train, train_cfg.seed + 1 + k + f)
        model = SevggLstm.build(model_cfg, seed=train_cfg.seed + 1 + f)
        shuffle_rng = np.random.default_rng(train_cfg.seed + 1 + 2 * k + f)
        try:
            history = fit_model(model, train.x, train.y, train_cfg, shuffle_rng)
        except FloatingPointError as err:
            raise FloatingPointError(f"fold {f}: {err}") from err
        predictions = model.predict(test.x)
        cm = confusion_matrix(test.y, predictions, data.k)
        fold_results.append(
            FoldResult(
                fold_index=f,
                history=history,
                confusion=cm,
                report=build_report(cm, data.codes),
                test_indices=split.test_indices,
                train_source_indices=train.source_indices.copy(),
                model=model,
            )
        )
    overall = {
        name: float(np.mean([getattr(r.report.overall, name) for r in fold_results]))
        for name in ("acc", "sen", "pre", "f1")
    }
    return CvResult(folds=fold_results, overall=overall)

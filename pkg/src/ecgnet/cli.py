"""Command-line front end: ``ecgnet <preprocess|train|evaluate|report>``.

Each command is deterministic given its flags and seeds.  ``train`` writes
its outputs under ``--out`` with fixed names (``loss.csv``,
``fold<k>.ckpt``, ``fold<k>.metrics.csv`` and, last, ``manifest.txt``); the
manifest records the resolved configuration, a content hash of the segment
store, and every artifact path, so finished runs can be merged by
``report``.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import os
import sys

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .ingest import (
    LabelScheme,
    Segment,
    compute_norm_stats,
    load_record,
    normalize,
    read_manifest,
    segment,
)
from .metrics import build_report, confusion_matrix, format_value, render_report
from .network import ModelConfig, config_from_mapping, config_to_text, parse_key_values
from .store import read_store, write_store
from .synthetic import make_synthetic_segments, parse_synthetic_spec
from .training import TrainConfig, run_cross_validation

_MODEL_KEYS = {
    "input_len",
    "num_classes",
    "conv_parts",
    "kernel_len",
    "se_positions",
    "se_reduction",
    "lstm_hidden",
    "fc_sizes",
}
_TRAIN_KEYS = {
    "epochs",
    "batch_size",
    "learning_rate",
    "optimizer",
    "k_folds",
    "oversample",
    "oversample_scope",
    "seed",
}


def _parse_bool(value, key):
    if value.lower() in ("true", "1", "yes"):
        return True
    if value.lower() in ("false", "0", "no"):
        return False
    raise ValueError(f"{key} must be true or false, got {value!r}")


def _resolve_configs(kv, dataset, seed_override):
    unknown = set(kv) - _MODEL_KEYS - _TRAIN_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    model_kv = {k: kv[k] for k in _MODEL_KEYS & set(kv)}
    model_kv.setdefault("input_len", str(dataset.x.shape[1]))
    model_kv.setdefault("num_classes", str(dataset.k))
    defaults = ModelConfig(
        input_len=int(model_kv["input_len"]), num_classes=int(model_kv["num_classes"])
    )
    full = parse_key_values(config_to_text(defaults))
    full.update(model_kv)
    model_cfg = config_from_mapping(full)
    train_kwargs = {}
    if "epochs" in kv:
        train_kwargs["epochs"] = int(kv["epochs"])
    if "batch_size" in kv:
        train_kwargs["batch_size"] = int(kv["batch_size"])
    if "learning_rate" in kv:
        train_kwargs["learning_rate"] = float(kv["learning_rate"])
    if "optimizer" in kv:
        train_kwargs["optimizer"] = kv["optimizer"]
    if "k_folds" in kv:
        train_kwargs["k_folds"] = int(kv["k_folds"])
    if "oversample" in kv:
        train_kwargs["oversample"] = _parse_bool(kv["oversample"], "oversample")
    if "oversample_scope" in kv:
        train_kwargs["oversample_scope"] = kv["oversample_scope"]
    if "seed" in kv:
        train_kwargs["seed"] = int(kv["seed"])
    if seed_override is not None:
        train_kwargs["seed"] = seed_override
    return model_cfg, TrainConfig(**train_kwargs)


def _train_config_text(cfg):
    return (
        f"epochs = {cfg.epochs}\n"
        f"batch_size = {cfg.batch_size}\n"
        f"learning_rate = {cfg.learning_rate!r}\n"
        f"optimizer = {cfg.optimizer}\n"
        f"k_folds = {cfg.k_folds}\n"
        f"oversample = {str(cfg.oversample).lower()}\n"
        f"oversample_scope = {cfg.oversample_scope}\n"
        f"seed = {cfg.seed}\n"
    )


def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


# ---------------------------------------------------------------------------
# preprocess


def _segments_from_manifest(data_dir, manifest_path, window_seconds, class_codes):
    rows = read_manifest(manifest_path)
    if not rows:
        raise ValueError(f"{manifest_path}: manifest assigns no segments")
    seen = set()
    for row in rows:
        key = (row.record_path, row.segment_index)
        if key in seen:
            raise ValueError(f"duplicate manifest entry for {key}")
        seen.add(key)
    windows_by_record = {}
    for path in sorted({r.record_path for r in rows}):
        record = load_record(os.path.join(data_dir, path))
        windows_by_record[path] = segment(record, window_seconds)
    codes = class_codes or tuple(sorted({r.label_code for r in rows}))
    scheme = LabelScheme(codes)
    segments = []
    labels = []
    for row in rows:
        windows = windows_by_record[row.record_path]
        if row.segment_index >= len(windows):
            raise ValueError(
                f"manifest/record mismatch: {row.record_path} yields {len(windows)} windows, "
                f"manifest references index {row.segment_index}"
            )
        segments.append(windows[row.segment_index])
        labels.append(scheme.class_id(row.label_code).index)
    return segments, np.array(labels, dtype=np.int64), codes


def cmd_preprocess(args):
    os.makedirs(args.out, exist_ok=True)
    if args.synthetic:
        kwargs = parse_synthetic_spec(args.synthetic)
        values, labels = make_synthetic_segments(seed=args.seed, **kwargs)
        codes = tuple(f"C{i}" for i in range(kwargs["num_classes"]))
        segments = [Segment(source_id=f"synthetic{i}", values=v) for i, v in enumerate(values)]
    else:
        if not args.data or not args.manifest:
            raise ValueError("preprocess needs --data and --manifest (or --synthetic)")
        codes = tuple(args.classes.split(",")) if args.classes else None
        segments, labels, codes = _segments_from_manifest(
            args.data, args.manifest, args.window_seconds, codes
        )
    stats = compute_norm_stats(segments)
    if args.norm_scope == "all":
        segments = [normalize(s, stats) for s in segments]
        normalized = True
    else:
        normalized = False
    x = np.stack([s.values for s in segments])
    write_store(os.path.join(args.out, "segments.bin"), x, labels, codes, normalized)
    with open(os.path.join(args.out, "norm_stats.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"mean = {stats.mean!r}\nstd = {stats.std!r}\nscope = {args.norm_scope}\n")
    print(f"wrote {len(segments)} segments of length {x.shape[1]} to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# train


def cmd_train(args):
    store_path = os.path.join(args.segments, "segments.bin")
    dataset = read_store(store_path)
    kv = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            kv = parse_key_values(fh.read(), source=args.config)
    model_cfg, train_cfg = _resolve_configs(kv, dataset, args.seed)
    result = run_cross_validation(dataset, model_cfg, train_cfg)
    os.makedirs(args.out, exist_ok=True)
    config_echo = config_to_text(model_cfg) + _train_config_text(train_cfg)

    loss_path = os.path.join(args.out, "loss.csv")
    with open(loss_path, "w", encoding="utf-8") as fh:
        for line in config_echo.splitlines():
            fh.write(f"# {line}\n")
        fh.write("fold,epoch,loss,train_accuracy\n")
        for fold in result.folds:
            for epoch, (loss, acc) in enumerate(
                zip(fold.history.losses, fold.history.accuracies), start=1
            ):
                fh.write(f"{fold.fold_index},{epoch},{loss!r},{acc!r}\n")

    artifacts = {"loss_curve": "loss.csv"}
    for fold in result.folds:
        ckpt = f"fold{fold.fold_index}.ckpt"
        save_checkpoint(fold.model, os.path.join(args.out, ckpt))
        metrics_name = f"fold{fold.fold_index}.metrics.csv"
        with open(os.path.join(args.out, metrics_name), "w", encoding="utf-8") as fh:
            fh.write(render_report(fold.report, "csv"))
        artifacts[f"fold{fold.fold_index}.checkpoint"] = ckpt
        artifacts[f"fold{fold.fold_index}.metrics"] = metrics_name

    missing = [name for name in artifacts.values() if not os.path.exists(os.path.join(args.out, name))]
    if missing:
        raise RuntimeError(f"declared outputs were not written: {missing}")

    manifest_path = os.path.join(args.out, "manifest.txt")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        fh.write("# ecgnet run manifest\n")
        fh.write(f"created_utc = {datetime.datetime.now(datetime.timezone.utc).isoformat()}\n")
        fh.write(f"dataset.path = {os.path.abspath(store_path)}\n")
        fh.write(f"dataset.sha256 = {_sha256(store_path)}\n")
        for line in config_echo.splitlines():
            fh.write(f"config.{line}\n")
        for key, name in sorted(artifacts.items()):
            fh.write(f"artifact.{key} = {name}\n")
        for name in ("acc", "sen", "pre", "f1"):
            fh.write(f"overall.{name} = {result.overall[name]!r}\n")
    print(f"trained {train_cfg.k_folds} folds; overall acc {format_value(result.overall['acc'])}")
    return 0


# ---------------------------------------------------------------------------
# evaluate


def cmd_evaluate(args):
    model = load_checkpoint(args.checkpoint)
    dataset = read_store(os.path.join(args.segments, "segments.bin"))
    if dataset.x.shape[1] != model.config.input_len:
        raise ValueError(
            f"segment length {dataset.x.shape[1]} does not match model input_len "
            f"{model.config.input_len}"
        )
    if dataset.k != model.config.num_classes:
        raise ValueError(
            f"store has {dataset.k} classes, model expects {model.config.num_classes}"
        )
    predictions = model.predict(dataset.x)
    confusion = confusion_matrix(dataset.y, predictions, dataset.k)
    report = build_report(confusion, dataset.codes)
    csv_text = render_report(report, "csv")
    text = render_report(report, "text")
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(csv_text)
    root, ext = os.path.splitext(args.out)
    text_path = (root if ext == ".csv" else args.out) + ".txt"
    with open(text_path, "w", encoding="utf-8") as fh:
        fh.write(text)
    print(text, end="")
    return 0


# ---------------------------------------------------------------------------
# report


def cmd_report(args):
    rows = []
    for run_dir in args.runs:
        manifest_path = os.path.join(run_dir, "manifest.txt")
        try:
            with open(manifest_path, encoding="utf-8") as fh:
                kv = parse_key_values(fh.read(), source=manifest_path)
            overall = {name: float(kv[f"overall.{name}"]) for name in ("acc", "sen", "pre", "f1")}
        except (OSError, KeyError, ValueError) as err:
            raise ValueError(f"cannot read run manifest {manifest_path}: {err}") from err
        rows.append((os.path.basename(os.path.normpath(run_dir)), overall))
    lines = ["run,acc,sen,pre,f1"]
    for name, overall in rows:
        lines.append(
            ",".join([name] + [format_value(overall[m]) for m in ("acc", "sen", "pre", "f1")])
        )
    table = "\n".join(lines) + "\n"
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(table)
    print(table, end="")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def build_parser():
    parser = argparse.ArgumentParser(prog="ecgnet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="segment, label and normalize raw records")
    p.add_argument("--data", help="directory holding record CSV files")
    p.add_argument("--manifest", help="CSV mapping (record_path, segment_index) to label codes")
    p.add_argument("--out", required=True, help="output directory for the segment store")
    p.add_argument("--window-seconds", type=float, default=10.0)
    p.add_argument("--classes", help="comma-separated class codes fixing the index order")
    p.add_argument(
        "--norm-scope",
        choices=("all", "train_only"),
        default="all",
        help="normalize with pooled stats now, or defer to per-fold training stats",
    )
    p.add_argument("--synthetic", help="generate a synthetic fixture, e.g. k=5,n=200,len=64")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="run k-fold cross-validation over a segment store")
    p.add_argument("--segments", required=True, help="directory holding segments.bin")
    p.add_argument("--config", help="key = value run configuration file")
    p.add_argument("--out", required=True, help="output directory for run artifacts")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a segment store with a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--segments", required=True)
    p.add_argument("--out", required=True, help="report CSV path (text written next to it)")
    p.add_argument("--seed", type=int, help="accepted everywhere; evaluation is deterministic")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="merge overall metrics of finished runs into one table")
    p.add_argument("--runs", nargs="+", required=True, help="run output directories")
    p.add_argument("--out", required=True, help="comparison table CSV path")
    p.add_argument("--seed", type=int, help="accepted everywhere; reporting is deterministic")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, FloatingPointError, RuntimeError) as err:
        print(f"ecgnet {args.command}: error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

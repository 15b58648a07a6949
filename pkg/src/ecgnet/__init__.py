"""SE-VGG11 + LSTM ECG segment classifier with hand-written numpy kernels."""

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .estimator import SevggLstmClassifier
from .ingest import (
    MIT_BIH,
    PCCD_2017,
    ClassId,
    EcgRecord,
    LabelScheme,
    NormStats,
    Segment,
    ZeroVarianceError,
    compute_norm_stats,
    load_record,
    normalize,
    read_manifest,
    segment,
)
from .metrics import (
    ClassMetrics,
    ConfusionMatrix,
    MetricReport,
    build_report,
    confusion_matrix,
    macro_overall,
    overall_metrics,
    parse_report_csv,
    per_class_metrics,
    render_report,
)
from .network import ModelConfig, SevggLstm, build_model, trace_shapes
from .store import read_store, write_store
from .synthetic import make_synthetic_segments
from .training import (
    Adam,
    CvResult,
    Dataset,
    FoldSplit,
    Sgd,
    TrainConfig,
    TrainHistory,
    fit_model,
    kfold_split,
    oversample,
    run_cross_validation,
    train_epoch,
)

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "CheckpointError",
    "ClassId",
    "ClassMetrics",
    "ConfusionMatrix",
    "CvResult",
    "Dataset",
    "EcgRecord",
    "FoldSplit",
    "LabelScheme",
    "MetricReport",
    "MIT_BIH",
    "ModelConfig",
    "NormStats",
    "PCCD_2017",
    "Segment",
    "SevggLstm",
    "SevggLstmClassifier",
    "Sgd",
    "TrainConfig",
    "TrainHistory",
    "ZeroVarianceError",
    "build_model",
    "build_report",
    "compute_norm_stats",
    "confusion_matrix",
    "fit_model",
    "kfold_split",
    "load_checkpoint",
    "load_record",
    "macro_overall",
    "make_synthetic_segments",
    "normalize",
    "overall_metrics",
    "oversample",
    "parse_report_csv",
    "per_class_metrics",
    "read_manifest",
    "read_store",
    "render_report",
    "run_cross_validation",
    "save_checkpoint",
    "segment",
    "trace_shapes",
    "train_epoch",
    "write_store",
]

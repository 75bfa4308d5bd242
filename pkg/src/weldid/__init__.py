"""Weld recognition from in-line inspection records."""

from .detect import WeldEvent, cluster_detections, match_events
from .evaluation import (
    ConfusionMatrix,
    cross_validate,
    error_rate,
    roc_curve,
    stratified_kfold,
    tpr_spc,
)
from .feature_select import CfsSelector, best_first_select, cfs_merit, exhaustive_select
from .ingest import SCHEMA, RecordTable, read_arff, read_csv, write_arff, write_csv
from .mlp import MLPWeldClassifier, train_mlp
from .preprocess import (
    Dataset,
    PipeTally,
    build_balanced_sets,
    filter_out_of_range,
    independent_test_set,
    label_records,
    trim_stationary_head,
)
from .svm import PukSVC, puk_kernel, train_smo
from .synth import SynthConfig, generate_run

__version__ = "0.1.0"

__all__ = [
    "SCHEMA", "RecordTable", "read_csv", "write_csv", "read_arff", "write_arff",
    "PipeTally", "Dataset", "filter_out_of_range", "trim_stationary_head",
    "label_records", "build_balanced_sets", "independent_test_set",
    "cfs_merit", "best_first_select", "exhaustive_select", "CfsSelector",
    "MLPWeldClassifier", "train_mlp", "PukSVC", "puk_kernel", "train_smo",
    "ConfusionMatrix", "stratified_kfold", "cross_validate", "error_rate", "tpr_spc",
    "roc_curve", "SynthConfig", "generate_run", "WeldEvent", "cluster_detections",
    "match_events",
]

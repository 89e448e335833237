"""Anomaly detection with an autoencoder and a trimmed heavy-tailed mixture,
scored by scalar or vector-summed component forces."""

__version__ = "0.1.0"

from .dataset import (
    DataError,
    Dataset,
    SplitSpec,
    StandardizationStats,
    generate_group_anomaly_toy,
    load_csv,
    split_inductive,
    standardize_fit_apply,
)
from .metrics import MetricReport, aggregate, auc_pr, auc_roc
from .mixture import DensityMode, MixtureParams
from .scoring import ScoreMode, score_all, select_outliers
from .trainer import Model, TrainConfig, fit, score_inductive

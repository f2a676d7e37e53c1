"""Time-series preparation, synthetic data and the neural forecasters."""

from .preprocess import (
    DATASET_COLUMNS,
    TimeSeriesDataset,
    impute,
    load_dataset_csv,
    normalize,
    rmse,
    write_dataset_csv,
)
from .synth import TABLE_STATS, ColumnStats, synthesize_dataset
from .rbf import RbfModel, feature_columns, fit_rbf, predict_pollutant, train_rbf
from .mlp import MlpModel, TrainingError, make_training_samples, predict_air_quality, train_mlp

__all__ = [
    "DATASET_COLUMNS",
    "TimeSeriesDataset",
    "impute",
    "normalize",
    "rmse",
    "load_dataset_csv",
    "write_dataset_csv",
    "ColumnStats",
    "TABLE_STATS",
    "synthesize_dataset",
    "RbfModel",
    "feature_columns",
    "fit_rbf",
    "train_rbf",
    "predict_pollutant",
    "MlpModel",
    "TrainingError",
    "make_training_samples",
    "train_mlp",
    "predict_air_quality",
]

"""Day-ahead (96 x 15-minute) load forecasting toolkit.

Four forecaster families (PSF, N-BEATS, encoder-decoder LSTM, TCN) on a
small reverse-mode tensor engine, with a rolling-history backtester,
seasonal error breakdown, and a distribution-shift monitor.
"""

from .backtest import BacktestReport, backtest_day_ahead, mape, mape_detail, seasonal_breakdown
from .covariates import COVARIATE_COLUMNS, COVARIATE_DIM, build_matrix, encode_timestamp
from .drift import DriftState, distribution_stats, evaluate_drift, rolling_mape
from .errors import (
    ConfigError,
    GridcastError,
    IngestError,
    ShapeError,
    SplitError,
    TrainingDiverged,
    WrangleError,
)
from .models import build_forecaster, load_forecaster, save_forecaster, train_forecaster
from .optim import TrainConfig, TrainingStats, fit
from .psf import PsfConfig, PsfEnsemble, PsfForecaster, day_matrix, kmeans_fit, psf_predict_day, select_clustering, silhouette_score
from .series import (
    LoadSeries,
    RawSeries,
    ShiftEvent,
    SplitDataset,
    SplitSpec,
    SyntheticSpec,
    generate_synthetic,
    ingest_csv,
    split_by_years,
    wrangle,
)
from .tcn import tcn_num_layers, tcn_receptive_field

__version__ = "0.1.0"

__all__ = [
    "BacktestReport",
    "COVARIATE_COLUMNS",
    "COVARIATE_DIM",
    "ConfigError",
    "DriftState",
    "GridcastError",
    "IngestError",
    "LoadSeries",
    "PsfConfig",
    "PsfEnsemble",
    "PsfForecaster",
    "RawSeries",
    "ShapeError",
    "ShiftEvent",
    "SplitDataset",
    "SplitError",
    "SplitSpec",
    "SyntheticSpec",
    "TrainConfig",
    "TrainingDiverged",
    "TrainingStats",
    "WrangleError",
    "backtest_day_ahead",
    "build_forecaster",
    "build_matrix",
    "day_matrix",
    "distribution_stats",
    "encode_timestamp",
    "evaluate_drift",
    "fit",
    "generate_synthetic",
    "ingest_csv",
    "kmeans_fit",
    "load_forecaster",
    "mape",
    "mape_detail",
    "psf_predict_day",
    "rolling_mape",
    "save_forecaster",
    "seasonal_breakdown",
    "select_clustering",
    "silhouette_score",
    "split_by_years",
    "tcn_num_layers",
    "tcn_receptive_field",
    "train_forecaster",
    "wrangle",
]

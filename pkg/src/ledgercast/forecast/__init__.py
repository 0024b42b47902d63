from .base import (
    ForecastConfig,
    ForecastError,
    ForecastResult,
    Method,
    read_forecasts,
    step_weights,
    write_forecasts,
)
from .histavg import hist_avg_forecast
from .neighbors import knn_forecast, nearest_neighbor_forecast, neighbor_forecast_at
from .solver import RegressionFit, fit_weighted_penalized_nnls, nnls
from .subseq import build_anomaly_penalty, hybrid_forecast, prepare_matches, subseq_ls_forecast
from .tuning import Grids, TunedParameters, classify_account, tune_by_class, tune_parameters

__all__ = [
    "ForecastConfig",
    "ForecastError",
    "ForecastResult",
    "Grids",
    "Method",
    "RegressionFit",
    "TunedParameters",
    "build_anomaly_penalty",
    "classify_account",
    "fit_weighted_penalized_nnls",
    "hist_avg_forecast",
    "hybrid_forecast",
    "knn_forecast",
    "nearest_neighbor_forecast",
    "neighbor_forecast_at",
    "nnls",
    "prepare_matches",
    "read_forecasts",
    "step_weights",
    "subseq_ls_forecast",
    "tune_by_class",
    "tune_parameters",
    "write_forecasts",
]

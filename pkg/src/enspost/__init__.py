"""Ensemble streamflow forecast postprocessing, baselines, and verification."""

from .timeseries import (
    DailySeries,
    FlowCategory,
    ForecastArchive,
    PairSet,
    Season,
    aggregate_to_daily,
    align_pairs,
    classify_season,
    flow_threshold,
)
from .training import LstmModel, TrainConfig, gradient_check, train
from .verification import (
    ProbForecastSet,
    brier_score,
    brier_skill_score,
    exceedance_probability,
    nse,
    pbias,
    reliability_diagram,
    rmse,
)

__version__ = "0.1.0"

__all__ = [
    "DailySeries",
    "FlowCategory",
    "ForecastArchive",
    "PairSet",
    "Season",
    "aggregate_to_daily",
    "align_pairs",
    "classify_season",
    "flow_threshold",
    "LstmModel",
    "TrainConfig",
    "gradient_check",
    "train",
    "ProbForecastSet",
    "brier_score",
    "brier_skill_score",
    "exceedance_probability",
    "nse",
    "pbias",
    "reliability_diagram",
    "rmse",
    "__version__",
]

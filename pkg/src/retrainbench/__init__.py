"""Retraining-aware evaluation harness for global forecasting models.

Runs rolling-origin backtests under configurable retraining frequencies,
produces point and conformal-quantile forecasts, scores them with scaled
metrics, measures computing time, converts time to monetary cost, and
tests scenario differences for statistical significance.
"""

from retrainbench.panel import PanelSchema, PanelSlice, SeriesPanel, filter_min_length, load_panel
from retrainbench.features import FeatureBuilder, FeatureConfig, FeatureMatrix
from retrainbench.models import FittedModel, ModelSpec, fit, predict
from retrainbench.conformal import ConformalCalibration, QuantileLevels, calibrate, quantile_forecast
from retrainbench.ensemble import EnsembleSpec, Leaderboard, combine_points, combine_quantiles, select_pool
from retrainbench.backtest import (
    CTLedger,
    RetrainSchedule,
    ScenarioConfig,
    ScenarioResult,
    make_schedule,
    run_grid,
    run_scenario,
)
from retrainbench.metrics import aggregate, normalize_to_baseline, rmsse, score_scenario, smql, sql
from retrainbench.stats import RankMatrix, compare_to_baseline, friedman, nemenyi_cd
from retrainbench.cost import CostModel, estimate_cost

__version__ = "0.1.0"

__all__ = [
    "PanelSchema",
    "PanelSlice",
    "SeriesPanel",
    "load_panel",
    "filter_min_length",
    "FeatureBuilder",
    "FeatureConfig",
    "FeatureMatrix",
    "ModelSpec",
    "FittedModel",
    "fit",
    "predict",
    "QuantileLevels",
    "ConformalCalibration",
    "calibrate",
    "quantile_forecast",
    "EnsembleSpec",
    "Leaderboard",
    "combine_points",
    "combine_quantiles",
    "select_pool",
    "ScenarioConfig",
    "RetrainSchedule",
    "ScenarioResult",
    "CTLedger",
    "make_schedule",
    "run_scenario",
    "run_grid",
    "rmsse",
    "sql",
    "smql",
    "aggregate",
    "normalize_to_baseline",
    "score_scenario",
    "RankMatrix",
    "friedman",
    "nemenyi_cd",
    "compare_to_baseline",
    "CostModel",
    "estimate_cost",
]

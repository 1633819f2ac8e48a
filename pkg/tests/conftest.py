import numpy as np
import pandas as pd
import pytest

from retrainbench.backtest import CTLedger, ScenarioConfig, ScenarioResult, run_scenario
from retrainbench.conformal import QuantileLevels
from retrainbench.features import FeatureConfig
from retrainbench.models import ModelSpec
from retrainbench.panel import load_panel


def seasonal_frame(n_series, n_obs, seed=0, noise=1.5, start="2022-01-03", ar=0.0):
    """Long-format daily panel: per-series level + weekly profile + noise."""
    rng = np.random.default_rng(seed)
    dates = pd.date_range(start, periods=n_obs, freq="D")
    dow = dates.dayofweek.to_numpy()
    frames = []
    for i in range(n_series):
        level = rng.uniform(20.0, 60.0)
        profile = rng.uniform(-4.0, 4.0, size=7)
        eps = rng.normal(0.0, noise, size=n_obs)
        if ar > 0:
            z = np.empty(n_obs)
            z[0] = eps[0]
            for t in range(1, n_obs):
                z[t] = ar * z[t - 1] + eps[t]
            eps = z
        y = level + profile[dow] + eps
        frames.append(pd.DataFrame({"unique_id": f"s{i:03d}", "ds": dates, "y": y}))
    return pd.concat(frames, ignore_index=True)


def seasonal_panel(n_series, n_obs, seed=0, **kwargs):
    return load_panel(seasonal_frame(n_series, n_obs, seed=seed, **kwargs), frequency=7)


@pytest.fixture
def small_panel():
    return seasonal_panel(6, 160, seed=3)


@pytest.fixture(scope="session")
def coverage_run():
    """Pooled-linear scenario over a 200x400 exchangeable-noise panel.

    Shared by the conformal coverage invariant and the acceptance suite,
    so the run happens once per session.
    """
    panel = seasonal_panel(200, 400, seed=11, noise=2.0)
    cfg = ScenarioConfig(horizon=7, test_length=33, retrain_window=7, frequency=7, s_prob=7)
    feature_config = FeatureConfig(lags=(1, 7), calendar=("dayofweek",))
    return run_scenario(
        panel, ModelSpec("pooled-linear", seed=0), cfg,
        feature_config=feature_config, calibration_multiple=4, method="linear",
    )


def coverage_of(result, low, high):
    levels = list(result.levels.levels)
    lo = result.quantiles[..., levels.index(low)]
    hi = result.quantiles[..., levels.index(high)]
    inside = (result.actuals >= lo) & (result.actuals <= hi)
    return float(inside.mean()), inside.size


def make_result(
    method="m",
    points=None,
    quantiles=None,
    actuals=None,
    levels=(0.1, 0.5, 0.9),
    fit_seconds=0.0,
    predict_seconds=0.0,
    fit_count=1,
    r=1,
    series_ids=("a",),
    test_length=None,
):
    """Minimal ScenarioResult for combination and metric tests."""
    levels = QuantileLevels(tuple(levels))
    points = np.asarray(points, dtype=float)
    n, o, h = points.shape
    if quantiles is None:
        quantiles = np.repeat(points[..., None], len(levels), axis=-1)
    if actuals is None:
        actuals = np.zeros_like(points)
    return ScenarioResult(
        method=method,
        retrain_window=r,
        test_length=test_length if test_length is not None else o + h - 1,
        series_ids=tuple(series_ids),
        origins=np.arange(o),
        levels=levels,
        points=points,
        quantiles=np.asarray(quantiles, dtype=float),
        actuals=np.asarray(actuals, dtype=float),
        ledger=CTLedger(fit_seconds=fit_seconds, predict_seconds=predict_seconds, fit_count=fit_count),
    )

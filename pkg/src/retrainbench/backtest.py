"""Rolling-origin evaluation with retraining schedules and CT accounting.

A scenario walks forecast origins through the test span with step size 1
under an expanding training window. The model (and its conformal
calibration) is refit only at origins selected by the retrain window r;
at reuse origins the last fitted model predicts from the new origin, so
feature state advances with new actuals while parameters stay frozen.

Fit seconds cover feature building, model training, and conformal
calibration at fit origins; predict seconds cover per-origin forecasting.
Both use a monotonic clock and time only those regions.
"""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from retrainbench.conformal import ConformalCalibration, QuantileLevels, calibrate, quantile_forecast
from retrainbench.features import FeatureBuilder, FeatureConfig
from retrainbench.models import FittedModel, ModelSpec, fit, predict
from retrainbench.panel import SeriesPanel

logger = logging.getLogger(__name__)


class ScenarioError(RuntimeError):
    """A scenario could not be completed."""


@dataclass(frozen=True)
class ScenarioConfig:
    """One (retrain window, horizon, test span) evaluation setup.

    ``s_point`` and ``s_prob`` are the seasonal periods used to scale the
    point and probabilistic metrics downstream.
    """

    horizon: int
    test_length: int
    retrain_window: int
    frequency: int
    step: int = 1
    s_point: int = 1
    s_prob: int = 1

    def __post_init__(self):
        if self.step != 1:
            raise ScenarioError(f"step size must be 1, got {self.step}")
        for name in ("horizon", "test_length", "retrain_window", "frequency", "s_point", "s_prob"):
            if getattr(self, name) < 1:
                raise ScenarioError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.retrain_window > self.test_length:
            raise ScenarioError(
                f"retrain_window {self.retrain_window} exceeds test_length {self.test_length}"
            )
        if self.horizon > self.test_length:
            raise ScenarioError(f"horizon {self.horizon} exceeds test_length {self.test_length}")

    @property
    def n_origins(self) -> int:
        return self.test_length - self.horizon + 1


@dataclass(frozen=True)
class RetrainSchedule:
    """Ordered forecast origins with per-origin fit/reuse flags."""

    origins: np.ndarray
    fit_flags: np.ndarray

    @property
    def fit_count(self) -> int:
        return int(self.fit_flags.sum())


def make_schedule(config: ScenarioConfig) -> RetrainSchedule:
    """Origins 0..T-h so every h-step window is scoreable; fit iff origin % r == 0."""
    origins = np.arange(config.n_origins)
    flags = origins % config.retrain_window == 0
    sched = RetrainSchedule(origins=origins, fit_flags=flags)
    assert sched.fit_count == math.ceil(config.n_origins / config.retrain_window)
    return sched


@dataclass
class CTLedger:
    """Computing-time ledger for one scenario."""

    fit_seconds: float = 0.0
    predict_seconds: float = 0.0
    fit_count: int = 0

    @property
    def ct_seconds(self) -> float:
        return self.fit_seconds + self.predict_seconds

    def to_dict(self) -> dict:
        return {
            "fit_seconds": self.fit_seconds,
            "predict_seconds": self.predict_seconds,
            "fit_count": self.fit_count,
            "ct_seconds": self.ct_seconds,
        }


@dataclass
class ScenarioResult:
    """Forecasts, actuals, and the CT ledger for one (method, r) cell."""

    method: str
    retrain_window: int
    test_length: int
    series_ids: tuple[str, ...]
    origins: np.ndarray
    levels: QuantileLevels
    points: np.ndarray  # (n_series, n_origins, h)
    quantiles: np.ndarray  # (n_series, n_origins, h, n_levels)
    actuals: np.ndarray  # (n_series, n_origins, h)
    ledger: CTLedger
    warnings: tuple[str, ...] = ()

    @property
    def horizon(self) -> int:
        return self.points.shape[2]

    def to_frame(self) -> pd.DataFrame:
        """Long-format forecasts: one row per (series, origin, step)."""
        n, o, h = self.points.shape
        idx_series = np.repeat(np.asarray(self.series_ids, dtype=object), o * h)
        idx_origin = np.tile(np.repeat(self.origins, h), n)
        idx_step = np.tile(np.arange(1, h + 1), n * o)
        data = {
            "series_id": idx_series,
            "origin": idx_origin,
            "step": idx_step,
            "actual": self.actuals.reshape(-1),
            "point": self.points.reshape(-1),
        }
        for li, label in enumerate(self.levels.labels()):
            data[label] = self.quantiles[..., li].reshape(-1)
        return pd.DataFrame(data)


def _default_multiple(frequency: int) -> int:
    return 4 if frequency == 7 else 2


def run_scenario(
    panel: SeriesPanel,
    spec,
    config: ScenarioConfig,
    *,
    builder: FeatureBuilder | None = None,
    feature_config: FeatureConfig | None = None,
    levels: QuantileLevels | None = None,
    calibration_multiple: int | None = None,
    method: str | None = None,
    base_models: Mapping[str, ModelSpec] | None = None,
    member_results: Mapping[str, "ScenarioResult"] | None = None,
) -> ScenarioResult:
    """Run one (method, r) cell over the panel.

    ``spec`` is a ModelSpec, or an EnsembleSpec whose members are looked
    up in ``base_models`` (already-computed ``member_results`` are reused
    instead of re-running).
    """
    from retrainbench.ensemble import EnsembleSpec, combine_results

    levels = levels or QuantileLevels()
    if isinstance(spec, EnsembleSpec):
        members = []
        for name in spec.members:
            if member_results is not None and name in member_results:
                members.append(member_results[name])
            else:
                if base_models is None or name not in base_models:
                    raise ScenarioError(f"ensemble member {name!r} has no model spec")
                members.append(run_scenario(
                    panel, base_models[name], config,
                    builder=builder, feature_config=feature_config, levels=levels,
                    calibration_multiple=calibration_multiple, method=name,
                ))
        return combine_results(members, method or spec.name)

    if builder is None:
        builder = FeatureBuilder(panel, feature_config or FeatureConfig.for_frequency(panel.frequency))
    multiple = calibration_multiple or _default_multiple(config.frequency)
    method = method or spec.kind

    sched = make_schedule(config)
    ids = panel.ids
    n = len(ids)
    h = config.horizon
    T = config.test_length
    base_ends = panel.tail_ends(T)

    points = np.empty((n, config.n_origins, h))
    quantiles = np.empty((n, config.n_origins, h, len(levels)))
    actuals = np.empty((n, config.n_origins, h))
    ledger = CTLedger()
    warn: list[str] = []

    model: FittedModel | None = None
    calibration: ConformalCalibration | None = None

    for oi, origin in enumerate(sched.origins):
        sl = panel.slice({sid: base_ends[sid] + int(origin) for sid in ids})
        if sched.fit_flags[oi]:
            t0 = time.perf_counter()
            try:
                matrix = builder.build_training(sl)
                model = fit(spec, matrix, origin=int(origin))
                calibration = calibrate(spec, sl, h, multiple, builder)
            except Exception as exc:
                raise ScenarioError(f"{method}: fit failed at origin {origin}: {exc}") from exc
            ledger.fit_seconds += time.perf_counter() - t0
            ledger.fit_count += 1
            warn.extend(f"origin {origin}: {w}" for w in calibration.warnings)
        preds, psec = predict(model, sl, h)
        ledger.predict_seconds += psec
        points[:, oi, :] = preds
        quantiles[:, oi, :, :] = quantile_forecast(preds, calibration, levels)
        for i, sid in enumerate(ids):
            end = sl.ends[sid]
            actuals[i, oi, :] = panel.values(sid)[end:end + h]

    return ScenarioResult(
        method=method,
        retrain_window=config.retrain_window,
        test_length=T,
        series_ids=ids,
        origins=sched.origins,
        levels=levels,
        points=points,
        quantiles=quantiles,
        actuals=actuals,
        ledger=ledger,
        warnings=tuple(warn),
    )


@dataclass
class GridResult:
    """All (method, r) cells of one run, plus pool-selection outputs."""

    results: dict[tuple[str, int], ScenarioResult]
    failures: dict[tuple[str, int], str]
    leaderboard: "object | None"
    ensembles: dict[str, "object"]
    baseline_r: int
    retrain_set: tuple[int, ...]
    base_methods: tuple[str, ...]

    @property
    def methods(self) -> tuple[str, ...]:
        return self.base_methods + tuple(self.ensembles)


def run_grid(
    panel: SeriesPanel,
    models: Mapping[str, ModelSpec],
    config: ScenarioConfig,
    retrain_set: Sequence[int],
    *,
    builder: FeatureBuilder | None = None,
    feature_config: FeatureConfig | None = None,
    levels: QuantileLevels | None = None,
    calibration_multiple: int | None = None,
    ensemble_criteria: Sequence[str] = (),
    ensemble_sizes: Sequence[int] = (),
    workers: int = 1,
) -> GridResult:
    """One ScenarioResult per (method, r); ensembles reuse cached member cells.

    ``config.retrain_window`` names the baseline scenario and must belong
    to ``retrain_set``. Pool selection runs on the baseline leaderboard of
    the base models and is then fixed across all retrain scenarios.
    Scenario failures are recorded and the grid continues.
    """
    from retrainbench.ensemble import Leaderboard, LeaderboardRow, combine_results, select_pool
    from retrainbench.metrics import score_scenario

    if not retrain_set:
        raise ScenarioError("retrain_set is empty")
    retrain_set = tuple(int(r) for r in retrain_set)
    baseline_r = config.retrain_window
    if baseline_r not in retrain_set:
        raise ScenarioError(f"baseline r={baseline_r} not in retrain_set {retrain_set}")
    if builder is None:
        builder = FeatureBuilder(panel, feature_config or FeatureConfig.for_frequency(panel.frequency))
    levels = levels or QuantileLevels()

    results: dict[tuple[str, int], ScenarioResult] = {}
    failures: dict[tuple[str, int], str] = {}

    def run_cell(name: str, spec: ModelSpec, r: int):
        cfg = replace(config, retrain_window=r)
        return run_scenario(
            panel, spec, cfg,
            builder=builder, levels=levels,
            calibration_multiple=calibration_multiple, method=name,
        )

    cells = [(name, spec, r) for name, spec in models.items() for r in retrain_set]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {(name, r): pool.submit(run_cell, name, spec, r) for name, spec, r in cells}
        for key, fut in futures.items():
            try:
                results[key] = fut.result()
            except Exception as exc:
                failures[key] = str(exc)
                logger.warning("scenario %s failed: %s", key, exc)
    else:
        for name, spec, r in cells:
            try:
                results[(name, r)] = run_cell(name, spec, r)
            except Exception as exc:
                failures[(name, r)] = str(exc)
                logger.warning("scenario %s failed: %s", (name, r), exc)

    # Baseline leaderboard over the base models that completed that cell.
    rows = []
    for name in models:
        res = results.get((name, baseline_r))
        if res is None:
            logger.warning("model %r missing baseline cell; excluded from leaderboard", name)
            continue
        try:
            score = score_scenario(res, panel, config.s_point, config.s_prob)
        except Exception as exc:
            logger.warning("model %r unscorable at baseline (%s); excluded from leaderboard", name, exc)
            continue
        rows.append(LeaderboardRow(
            model=name,
            rmsse=score.rmsse.value,
            smql=score.smql.value,
            ct_seconds=res.ledger.ct_seconds,
        ))
    leaderboard = Leaderboard(tuple(rows)) if rows else None

    ensembles: dict[str, object] = {}
    for criterion in ensemble_criteria:
        for k in ensemble_sizes:
            short = "acc" if criterion == "accuracy" else "time"
            ens_name = f"ens-{short}-{k}"
            if leaderboard is None:
                failures[(ens_name, baseline_r)] = "no leaderboard (no baseline results)"
                continue
            try:
                spec = select_pool(leaderboard, criterion, k)
            except Exception as exc:
                failures[(ens_name, baseline_r)] = f"pool selection failed: {exc}"
                continue
            ensembles[ens_name] = spec
            for r in retrain_set:
                missing = [m for m in spec.members if (m, r) not in results]
                if missing:
                    failures[(ens_name, r)] = f"missing member cells {missing} at r={r}"
                    continue
                results[(ens_name, r)] = combine_results(
                    [results[(m, r)] for m in spec.members], ens_name
                )

    return GridResult(
        results=results,
        failures=failures,
        leaderboard=leaderboard,
        ensembles=ensembles,
        baseline_r=baseline_r,
        retrain_set=retrain_set,
        base_methods=tuple(models),
    )


def write_store(grid: GridResult, out_dir) -> Path:
    """Persist per-scenario forecasts (CSV) and CT ledgers (JSON)."""
    out = Path(out_dir) / "forecasts"
    out.mkdir(parents=True, exist_ok=True)
    for (method, r), res in sorted(grid.results.items()):
        stem = f"{method}__r{r}"
        res.to_frame().to_csv(out / f"{stem}.csv", index=False)
        ledger = res.ledger.to_dict()
        if res.warnings:
            ledger["warnings"] = list(res.warnings)
        (out / f"{stem}.ledger.json").write_text(json.dumps(ledger, indent=2))
    return out

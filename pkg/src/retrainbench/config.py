"""Run configuration: one structured file drives the whole pipeline.

All science (data schema, features, scenario grid, models, ensembles,
quantile levels, conformal window, cost assumptions, seed) lives in the
config for reproducibility; CLI flags only select the config path, an
output override, and verbosity. Validation collects every violation with
a dotted field path before failing.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from retrainbench.backtest import ScenarioConfig
from retrainbench.conformal import DEFAULT_LEVELS, QuantileLevels
from retrainbench.features import CALENDAR_FEATURES, FeatureConfig
from retrainbench.models import ModelSpec, model_kinds
from retrainbench.panel import PanelSchema

_NAME_RE = re.compile(r"^[A-Za-z0-9_-]+$")
_DEFAULT_MIN_LENGTH = {7: 730, 52: 157}


class ConfigError(ValueError):
    """Invalid run configuration; ``errors`` lists (field path, message)."""

    def __init__(self, errors: list[tuple[str, str]]):
        self.errors = errors
        lines = "; ".join(f"{path}: {msg}" for path, msg in errors)
        super().__init__(f"invalid configuration: {lines}")


@dataclass
class RunConfig:
    """Fully resolved run description."""

    panel_path: Path
    statics_path: Path | None
    exog_path: Path | None
    schema: PanelSchema
    frequency: int
    min_length: int
    feature_config: FeatureConfig
    scenario: ScenarioConfig  # retrain_window holds the baseline r
    retrain_set: tuple[int, ...]
    models: dict[str, ModelSpec]
    ensemble_criteria: tuple[str, ...]
    ensemble_sizes: tuple[int, ...]
    levels: QuantileLevels
    conformal_multiple: int
    rate_per_hour: float
    target_series: int | None
    stats_alpha: float
    stats_blocks: str
    seed: int
    output: Path | None
    workers: int
    effective: dict = field(repr=False, default_factory=dict)

    @property
    def baseline_r(self) -> int:
        return self.scenario.retrain_window


class _Reader:
    """Typed accessors over a raw mapping, accumulating dotted-path errors."""

    def __init__(self, raw: Mapping[str, Any], errors: list[tuple[str, str]], prefix: str = ""):
        self.raw = raw if isinstance(raw, Mapping) else {}
        self.errors = errors
        self.prefix = prefix

    def path(self, key: str) -> str:
        return f"{self.prefix}{key}"

    def error(self, key: str, msg: str) -> None:
        self.errors.append((self.path(key), msg))

    def section(self, key: str) -> "_Reader":
        value = self.raw.get(key, {})
        if value is None:
            value = {}
        if not isinstance(value, Mapping):
            self.error(key, f"must be a mapping, got {type(value).__name__}")
            value = {}
        return _Reader(value, self.errors, f"{self.path(key)}.")

    def get(self, key: str, default=None):
        value = self.raw.get(key, default)
        return default if value is None else value

    def get_int(self, key: str, default=None, minimum=None):
        value = self.get(key, default)
        if not isinstance(value, int) or isinstance(value, bool):
            self.error(key, f"must be an integer, got {value!r}")
            return default
        if minimum is not None and value < minimum:
            self.error(key, f"must be >= {minimum}, got {value}")
            return default
        return value

    def get_float(self, key: str, default=None, positive=False):
        value = self.get(key, default)
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            self.error(key, f"must be a number, got {value!r}")
            return default
        if positive and value <= 0:
            self.error(key, f"must be > 0, got {value}")
            return default
        return float(value)

    def get_str(self, key: str, default=None):
        value = self.get(key, default)
        if value is not None and not isinstance(value, str):
            self.error(key, f"must be a string, got {value!r}")
            return default
        return value

    def get_bool(self, key: str, default=False):
        value = self.get(key, default)
        if not isinstance(value, bool):
            self.error(key, f"must be a boolean, got {value!r}")
            return default
        return value

    def get_list(self, key: str, default=()):
        value = self.get(key, list(default))
        if not isinstance(value, (list, tuple)):
            self.error(key, f"must be a list, got {value!r}")
            return list(default)
        return list(value)


def load_run_config(path) -> RunConfig:
    """Parse and validate a YAML run configuration."""
    path = Path(path)
    raw = yaml.safe_load(path.read_text())
    if not isinstance(raw, Mapping):
        raise ConfigError([("<root>", "configuration must be a mapping")])
    return build_run_config(raw, base_dir=path.parent)


def build_run_config(raw: Mapping[str, Any], base_dir: Path | None = None) -> RunConfig:
    errors: list[tuple[str, str]] = []
    root = _Reader(raw, errors)
    base_dir = Path(base_dir) if base_dir is not None else Path.cwd()

    frequency = root.get_int("frequency", minimum=1)
    if frequency is None:
        frequency = 7  # placeholder so downstream checks can continue

    data = root.section("data")
    panel_rel = data.get_str("panel")
    if not panel_rel:
        data.error("panel", "panel CSV path is required")
    columns = data.section("columns")
    schema = PanelSchema(
        id=columns.get_str("id", "unique_id"),
        timestamp=columns.get_str("timestamp", "ds"),
        value=columns.get_str("value", "y"),
    )

    def resolve(rel: str | None) -> Path | None:
        if rel is None:
            return None
        p = Path(rel)
        return p if p.is_absolute() else (base_dir / p).resolve()

    min_length = root.get_int("min_length", _DEFAULT_MIN_LENGTH.get(frequency, 0), minimum=0)

    feats = root.section("features")
    default_feats = FeatureConfig.for_frequency(frequency)
    lags = feats.get_list("lags", default_feats.lags)
    windows = feats.get_list("rolling_windows", default_feats.rolling_windows)
    calendar = feats.get_list("calendar", default_feats.calendar)
    exog_feats = feats.get_list("exogenous", ())
    for i, k in enumerate(lags):
        if not isinstance(k, int) or k < 1:
            feats.error(f"lags[{i}]", f"must be a positive integer, got {k!r}")
    for i, w in enumerate(windows):
        if not isinstance(w, int) or w < 1:
            feats.error(f"rolling_windows[{i}]", f"must be a positive integer, got {w!r}")
    for i, c in enumerate(calendar):
        if c not in CALENDAR_FEATURES:
            feats.error(f"calendar[{i}]", f"must be one of {CALENDAR_FEATURES}, got {c!r}")
    encoding = feats.get_str("static_encoding", default_feats.static_encoding)
    if encoding not in ("ordinal", "onehot"):
        feats.error("static_encoding", f"must be 'ordinal' or 'onehot', got {encoding!r}")
        encoding = "ordinal"
    expanding = feats.get_bool("expanding_mean", default_feats.expanding_mean)

    scen = root.section("scenario")
    horizon = scen.get_int("horizon", minimum=1)
    test_length = scen.get_int("test_length", minimum=1)
    step = scen.get_int("step", 1, minimum=1)
    if step != 1:
        scen.error("step", f"only step size 1 is supported, got {step}")
    retrain_raw = scen.get_list("retrain_set")
    if not retrain_raw:
        scen.error("retrain_set", "at least one retrain window is required")
    retrain_set: list[int] = []
    for i, r in enumerate(retrain_raw):
        if not isinstance(r, int) or isinstance(r, bool) or r < 1:
            scen.error(f"retrain_set[{i}]", f"must be an integer >= 1, got {r!r}")
        elif test_length is not None and r > test_length:
            scen.error(f"retrain_set[{i}]", f"must be <= test_length {test_length}, got {r}")
        else:
            retrain_set.append(r)
    if horizon is not None and test_length is not None and horizon > test_length:
        scen.error("horizon", f"must be <= test_length {test_length}, got {horizon}")
    baseline = scen.get_int("baseline", minimum=1)
    if baseline is None and retrain_set:
        baseline = retrain_set[0]
    if baseline is not None and retrain_set and baseline not in retrain_set:
        scen.error("baseline", f"baseline {baseline} not in retrain_set {retrain_set}")
    s_point = scen.get_int("s_point", 1, minimum=1)
    s_prob = scen.get_int("s_prob", 7 if frequency == 7 else 1, minimum=1)

    seed = root.get_int("seed", 0)

    models_raw = root.get_list("models")
    if not models_raw:
        errors.append(("models", "at least one model is required"))
    models: dict[str, ModelSpec] = {}
    for i, entry in enumerate(models_raw):
        me = _Reader(entry if isinstance(entry, Mapping) else {}, errors, f"models[{i}].")
        if not isinstance(entry, Mapping):
            errors.append((f"models[{i}]", f"must be a mapping, got {entry!r}"))
            continue
        kind = me.get_str("kind")
        name = me.get_str("name", kind)
        if kind not in model_kinds():
            me.error("kind", f"must be one of {model_kinds()}, got {kind!r}")
            continue
        if not name or not _NAME_RE.match(name):
            me.error("name", f"must match [A-Za-z0-9_-]+, got {name!r}")
            continue
        if name in models:
            me.error("name", f"duplicate model name {name!r}")
            continue
        params = me.get("params", {})
        if not isinstance(params, Mapping):
            me.error("params", f"must be a mapping, got {params!r}")
            continue
        model_seed = me.get_int("seed", seed)
        try:
            models[name] = ModelSpec(kind=kind, params=dict(params), seed=model_seed)
        except Exception as exc:
            me.error("params", str(exc))

    ens = root.section("ensembles")
    criteria = tuple(ens.get_list("criteria", ()))
    for i, c in enumerate(criteria):
        if c not in ("accuracy", "time"):
            ens.error(f"criteria[{i}]", f"must be 'accuracy' or 'time', got {c!r}")
    sizes_raw = ens.get_list("sizes", ())
    sizes: list[int] = []
    for i, k in enumerate(sizes_raw):
        if not isinstance(k, int) or isinstance(k, bool) or not 2 <= k <= 5:
            ens.error(f"sizes[{i}]", f"must be an integer in 2..5, got {k!r}")
        else:
            sizes.append(k)
    if criteria and sizes and models and max(sizes) > len(models):
        ens.error("sizes", f"largest pool {max(sizes)} exceeds the {len(models)} base models")

    levels_raw = root.get_list("quantile_levels", DEFAULT_LEVELS)
    levels = None
    try:
        levels = QuantileLevels(tuple(float(q) for q in levels_raw))
    except Exception as exc:
        errors.append(("quantile_levels", str(exc)))

    multiple = root.get_int("conformal_multiple", 4 if frequency == 7 else 2, minimum=2)

    cost = root.section("cost")
    rate = cost.get_float("rate_per_hour", 3.5, positive=True)
    target = cost.get("target_series")
    if target is not None and (not isinstance(target, int) or target < 1):
        cost.error("target_series", f"must be a positive integer, got {target!r}")
        target = None

    alpha = root.get_float("stats_alpha", 0.05)
    if alpha not in (0.05, 0.10):
        errors.append(("stats_alpha", f"must be 0.05 or 0.10, got {alpha!r}"))
        alpha = 0.05
    blocks = root.get_str("stats_blocks", "series")
    if blocks not in ("series", "cells"):
        errors.append(("stats_blocks", f"must be 'series' or 'cells', got {blocks!r}"))
        blocks = "series"

    output = root.get_str("output")
    workers = root.get_int("workers", 1, minimum=1)

    feature_config = None
    if not errors:
        try:
            feature_config = FeatureConfig(
                lags=tuple(sorted(set(lags))),
                rolling_windows=tuple(sorted(set(windows))),
                expanding_mean=expanding,
                calendar=tuple(c for c in CALENDAR_FEATURES if c in calendar),
                static_encoding=encoding,
                exogenous=tuple(exog_feats),
            )
        except Exception as exc:
            errors.append(("features", str(exc)))

    scenario = None
    if not errors:
        try:
            scenario = ScenarioConfig(
                horizon=horizon,
                test_length=test_length,
                retrain_window=baseline,
                frequency=frequency,
                step=1,
                s_point=s_point,
                s_prob=s_prob,
            )
        except Exception as exc:
            errors.append(("scenario", str(exc)))

    if errors:
        raise ConfigError(errors)

    cfg = RunConfig(
        panel_path=resolve(panel_rel),
        statics_path=resolve(data.get_str("statics")),
        exog_path=resolve(data.get_str("exogenous")),
        schema=schema,
        frequency=frequency,
        min_length=min_length,
        feature_config=feature_config,
        scenario=scenario,
        retrain_set=tuple(retrain_set),
        models=models,
        ensemble_criteria=criteria,
        ensemble_sizes=tuple(sizes),
        levels=levels,
        conformal_multiple=multiple,
        rate_per_hour=rate,
        target_series=target,
        stats_alpha=alpha,
        stats_blocks=blocks,
        seed=seed,
        output=Path(output) if output else None,
        workers=workers,
    )
    cfg.effective = effective_dict(cfg)
    return cfg


def effective_dict(cfg: RunConfig) -> dict:
    """Resolved configuration, suitable for re-running the same experiment."""
    return {
        "data": {
            "panel": str(cfg.panel_path),
            "statics": str(cfg.statics_path) if cfg.statics_path else None,
            "exogenous": str(cfg.exog_path) if cfg.exog_path else None,
            "columns": {
                "id": cfg.schema.id,
                "timestamp": cfg.schema.timestamp,
                "value": cfg.schema.value,
            },
        },
        "frequency": cfg.frequency,
        "min_length": cfg.min_length,
        "features": {
            "lags": list(cfg.feature_config.lags),
            "rolling_windows": list(cfg.feature_config.rolling_windows),
            "expanding_mean": cfg.feature_config.expanding_mean,
            "calendar": list(cfg.feature_config.calendar),
            "static_encoding": cfg.feature_config.static_encoding,
            "exogenous": list(cfg.feature_config.exogenous),
        },
        "scenario": {
            "horizon": cfg.scenario.horizon,
            "test_length": cfg.scenario.test_length,
            "step": cfg.scenario.step,
            "retrain_set": list(cfg.retrain_set),
            "baseline": cfg.baseline_r,
            "s_point": cfg.scenario.s_point,
            "s_prob": cfg.scenario.s_prob,
        },
        "models": [
            {"name": name, "kind": spec.kind, "params": dict(spec.params), "seed": spec.seed}
            for name, spec in cfg.models.items()
        ],
        "ensembles": {
            "criteria": list(cfg.ensemble_criteria),
            "sizes": list(cfg.ensemble_sizes),
        },
        "quantile_levels": list(cfg.levels.levels),
        "conformal_multiple": cfg.conformal_multiple,
        "cost": {
            "rate_per_hour": cfg.rate_per_hour,
            "target_series": cfg.target_series,
        },
        "stats_alpha": cfg.stats_alpha,
        "stats_blocks": cfg.stats_blocks,
        "seed": cfg.seed,
        "output": str(cfg.output) if cfg.output else None,
        "workers": cfg.workers,
    }

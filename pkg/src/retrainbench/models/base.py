"""Shared fit/predict interface for the global-model zoo.

Every learner trains one model on pooled rows from all series
(cross-learning) and forecasts recursively: predictions feed the lag
features of later steps. Fit and predict wall-clock seconds are recorded
separately with a monotonic clock.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from retrainbench.features import FeatureBuilder, FeatureMatrix
from retrainbench.panel import PanelSlice


class ModelError(ValueError):
    """Model specification or training contract violation."""


class Learner:
    """One model family: parameter validation plus array-level fit/predict."""

    kind: str = ""
    uses_features: bool = True

    def validate_params(self, params: Mapping[str, Any]) -> dict[str, Any]:
        raise NotImplementedError

    def fit_arrays(self, X: np.ndarray, y: np.ndarray, params: dict, rng: np.random.Generator,
                   matrix: FeatureMatrix) -> Any:
        raise NotImplementedError

    def predict_arrays(self, state: Any, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def required_history(self, state: Any) -> int:
        return 0

    def _check_params(self, params: Mapping[str, Any], defaults: dict[str, Any]) -> dict[str, Any]:
        unknown = [k for k in params if k not in defaults]
        if unknown:
            raise ModelError(f"{self.kind}: unknown hyperparameters {unknown}")
        merged = dict(defaults)
        merged.update(params)
        return merged


_REGISTRY: dict[str, Learner] = {}


def register(learner: Learner) -> Learner:
    _REGISTRY[learner.kind] = learner
    return learner


def get_learner(kind: str) -> Learner:
    if kind not in _REGISTRY:
        raise ModelError(f"unknown model kind {kind!r}; available: {sorted(_REGISTRY)}")
    return _REGISTRY[kind]


def model_kinds() -> tuple[str, ...]:
    return tuple(sorted(_REGISTRY))


@dataclass(frozen=True)
class ModelSpec:
    """Declarative model description: kind, hyperparameters, seed."""

    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        get_learner(self.kind).validate_params(self.params)


@dataclass
class FittedModel:
    """Learned parameters plus the feature recipe they were trained with."""

    spec: ModelSpec
    state: Any
    builder: FeatureBuilder
    fit_seconds: float
    fit_origin: int | None = None

    @property
    def kind(self) -> str:
        return self.spec.kind


def fit(spec: ModelSpec, matrix: FeatureMatrix, origin: int | None = None) -> FittedModel:
    """Train one pooled model; same spec+matrix+seed gives identical parameters."""
    learner = get_learner(spec.kind)
    params = learner.validate_params(spec.params)
    if learner.uses_features:
        if len(matrix) == 0:
            raise ModelError(f"{spec.kind}: empty training matrix")
        if matrix.X.size and not np.isfinite(matrix.X).all():
            raise ModelError(f"{spec.kind}: non-finite values in feature matrix")
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    t0 = time.perf_counter()
    state = learner.fit_arrays(matrix.X, matrix.y, params, rng, matrix)
    fit_seconds = time.perf_counter() - t0
    return FittedModel(spec=spec, state=state, builder=matrix.builder,
                       fit_seconds=fit_seconds, fit_origin=origin)


def predict(model: FittedModel, sl: PanelSlice, horizon: int) -> tuple[np.ndarray, float]:
    """Recursive h-step forecasts, one row per series of the slice.

    Returns (points, predict_seconds) where points has shape
    (n_series, horizon) ordered like ``sl.ids``.
    """
    if horizon < 0:
        raise ModelError(f"horizon must be >= 0, got {horizon}")
    learner = get_learner(model.kind)
    t0 = time.perf_counter()
    n = len(sl.ids)
    if horizon == 0:
        return np.empty((n, 0)), time.perf_counter() - t0
    state = model.builder.new_state(sl, min_tail=learner.required_history(model.state))
    out = np.empty((n, horizon))
    for s in range(horizon):
        if learner.uses_features:
            X = state.step_features()
            yhat = learner.predict_arrays(model.state, X)
        else:
            yhat = state.lag(learner.required_history(model.state))
        state.advance(yhat)
        out[:, s] = yhat
    return out, time.perf_counter() - t0

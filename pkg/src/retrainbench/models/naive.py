"""Seasonal-naive benchmark: step s repeats the value one season back."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from retrainbench.models.base import Learner, ModelError, register


@dataclass(frozen=True)
class SeasonalNaiveState:
    season_length: int


class SeasonalNaive(Learner):
    kind = "seasonal-naive"
    uses_features = False

    def validate_params(self, params):
        merged = self._check_params(params, {"season_length": None})
        s = merged["season_length"]
        if s is not None and (not isinstance(s, int) or s < 1):
            raise ModelError(f"seasonal-naive: season_length must be a positive int, got {s!r}")
        return merged

    def fit_arrays(self, X, y, params, rng, matrix):
        season = params["season_length"] or matrix.frequency
        return SeasonalNaiveState(season_length=int(season))

    def predict_arrays(self, state, X) -> np.ndarray:
        raise ModelError("seasonal-naive predicts from history, not features")

    def required_history(self, state) -> int:
        return state.season_length


register(SeasonalNaive())

"""Pooled linear regression, plain and ridge-penalized."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from retrainbench.models.base import Learner, ModelError, register


@dataclass(frozen=True)
class LinearState:
    coef: np.ndarray
    intercept: float


def _design(X: np.ndarray) -> np.ndarray:
    return np.column_stack([X, np.ones(len(X))])


class PooledLinear(Learner):
    kind = "pooled-linear"

    def validate_params(self, params):
        return self._check_params(params, {})

    def fit_arrays(self, X, y, params, rng, matrix):
        A = _design(X)
        rank = np.linalg.matrix_rank(A)
        if rank < A.shape[1]:
            raise ModelError(
                "pooled-linear: singular normal equations "
                f"(design rank {rank} < {A.shape[1]}); use pooled-ridge"
            )
        beta, *_ = np.linalg.lstsq(A, y, rcond=None)
        return LinearState(coef=beta[:-1], intercept=float(beta[-1]))

    def predict_arrays(self, state, X):
        return X @ state.coef + state.intercept


class PooledRidge(Learner):
    kind = "pooled-ridge"

    def validate_params(self, params):
        merged = self._check_params(params, {"penalty": 1.0})
        if not isinstance(merged["penalty"], (int, float)) or merged["penalty"] < 0:
            raise ModelError(f"pooled-ridge: penalty must be >= 0, got {merged['penalty']!r}")
        return merged

    def fit_arrays(self, X, y, params, rng, matrix):
        A = _design(X)
        p = A.shape[1]
        # Intercept column is never penalized.
        reg = np.eye(p) * float(params["penalty"])
        reg[-1, -1] = 0.0
        gram = A.T @ A + reg
        try:
            beta = np.linalg.solve(gram, A.T @ y)
        except np.linalg.LinAlgError as exc:
            raise ModelError(f"pooled-ridge: singular system ({exc}); increase penalty") from exc
        return LinearState(coef=beta[:-1], intercept=float(beta[-1]))

    def predict_arrays(self, state, X):
        return X @ state.coef + state.intercept


register(PooledLinear())
register(PooledRidge())

"""Feed-forward regression network trained by mini-batch gradient descent.

Single hidden layer by default (configurable), ReLU activations, squared
error loss, fixed epoch count. All randomness (initialization, batch
order) flows from the model seed, so a fit is fully reproducible. Inputs
and targets are standardized internally; the learned scalers travel with
the state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from retrainbench.models.base import Learner, ModelError, register


@dataclass
class MLPState:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: float
    y_std: float


def _forward(weights, biases, X):
    """Returns per-layer pre-activations and activations (input first)."""
    acts = [X]
    pre = []
    a = X
    for i, (W, b) in enumerate(zip(weights, biases)):
        z = a @ W + b
        pre.append(z)
        a = np.maximum(z, 0.0) if i < len(weights) - 1 else z
        acts.append(a)
    return pre, acts


def loss_and_grads(weights, biases, X, y):
    """Half mean squared error and its analytic gradients.

    Gradients are exact backprop; the test suite cross-checks them
    against central finite differences.
    """
    n = len(X)
    pre, acts = _forward(weights, biases, X)
    pred = acts[-1][:, 0]
    err = pred - y
    loss = 0.5 * float(np.mean(err**2))

    grads_w = [np.zeros_like(W) for W in weights]
    grads_b = [np.zeros_like(b) for b in biases]
    delta = (err / n)[:, None]
    for i in range(len(weights) - 1, -1, -1):
        grads_w[i] = acts[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ weights[i].T) * (pre[i - 1] > 0)
    return loss, grads_w, grads_b


def _init(sizes, rng):
    weights, biases = [], []
    for i in range(len(sizes) - 1):
        fan_in = sizes[i]
        scale = np.sqrt(2.0 / fan_in) if i < len(sizes) - 2 else np.sqrt(1.0 / fan_in)
        weights.append(rng.normal(0.0, scale, size=(sizes[i], sizes[i + 1])))
        biases.append(np.zeros(sizes[i + 1]))
    return weights, biases


class MLP(Learner):
    kind = "mlp"

    def validate_params(self, params):
        merged = self._check_params(params, {
            "hidden": (32,),
            "epochs": 200,
            "batch_size": 256,
            "learning_rate": 0.01,
        })
        hidden = tuple(merged["hidden"])
        if not hidden or any(not isinstance(h, int) or h < 1 for h in hidden):
            raise ModelError(f"mlp: hidden sizes must be positive ints, got {merged['hidden']!r}")
        merged["hidden"] = hidden
        if not isinstance(merged["epochs"], int) or merged["epochs"] < 1:
            raise ModelError(f"mlp: epochs must be >= 1, got {merged['epochs']!r}")
        if not isinstance(merged["batch_size"], int) or merged["batch_size"] < 1:
            raise ModelError(f"mlp: batch_size must be >= 1, got {merged['batch_size']!r}")
        if merged["learning_rate"] <= 0:
            raise ModelError(f"mlp: learning_rate must be > 0, got {merged['learning_rate']!r}")
        return merged

    def fit_arrays(self, X, y, params, rng, matrix):
        x_mean = X.mean(axis=0) if X.size else np.zeros(X.shape[1])
        x_std = X.std(axis=0) if X.size else np.ones(X.shape[1])
        x_std = np.where(x_std > 0, x_std, 1.0)
        y_mean = float(y.mean())
        y_std = float(y.std()) or 1.0
        Xs = (X - x_mean) / x_std
        ys = (y - y_mean) / y_std

        sizes = [X.shape[1], *params["hidden"], 1]
        weights, biases = _init(sizes, rng)
        n = len(Xs)
        batch = min(params["batch_size"], n)
        lr = float(params["learning_rate"])
        for epoch in range(params["epochs"]):
            order = rng.permutation(n)
            for lo in range(0, n, batch):
                rows = order[lo:lo + batch]
                loss, gw, gb = loss_and_grads(weights, biases, Xs[rows], ys[rows])
                if not np.isfinite(loss):
                    raise ModelError(f"mlp: non-finite loss at epoch {epoch}")
                for i in range(len(weights)):
                    weights[i] -= lr * gw[i]
                    biases[i] -= lr * gb[i]
        return MLPState(weights, biases, x_mean, x_std, y_mean, y_std)

    def predict_arrays(self, state, X):
        Xs = (X - state.x_mean) / state.x_std
        _, acts = _forward(state.weights, state.biases, Xs)
        return acts[-1][:, 0] * state.y_std + state.y_mean


register(MLP())

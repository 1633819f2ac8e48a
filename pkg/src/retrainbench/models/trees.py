"""Regression trees with exact greedy splits, boosted and bagged.

The split search scans every boundary between distinct sorted feature
values and picks the squared-error reduction maximizer; ties go to the
first feature in scan order and the lowest threshold, so a fit is fully
deterministic for a given seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from retrainbench.models.base import Learner, ModelError, register

_MIN_GAIN = 1e-12


@dataclass
class Tree:
    """Flat array representation; feature == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                break
            rows = np.flatnonzero(active)
            f = feat[rows]
            go_left = X[rows, f] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])
        return self.value[node]


def _node_sse(csum_last: float, csq_last: float, n: int) -> float:
    return csq_last - csum_last * csum_last / n


def _best_split(X, y, rows, features, min_samples_leaf):
    """Exact greedy search over (feature, boundary) pairs.

    Returns (gain, feature, threshold) or None when no split improves the
    node squared error.
    """
    n = len(rows)
    best = None
    y_node = y[rows]
    total_sum = y_node.sum()
    total_sq = float(y_node @ y_node)
    parent_sse = _node_sse(total_sum, total_sq, n)
    for j in features:
        xj = X[rows, j]
        order = np.argsort(xj, kind="stable")
        xs = xj[order]
        ys = y_node[order]
        csum = np.cumsum(ys)
        csq = np.cumsum(ys * ys)
        # Split after position i keeps rows 0..i on the left.
        i = np.arange(n - 1)
        valid = xs[:-1] < xs[1:]
        valid &= (i + 1 >= min_samples_leaf) & (n - i - 1 >= min_samples_leaf)
        if not valid.any():
            continue
        left_n = i + 1
        right_n = n - left_n
        left_sse = csq[:-1] - csum[:-1] ** 2 / left_n
        right_sse = (total_sq - csq[:-1]) - (total_sum - csum[:-1]) ** 2 / right_n
        gain = np.where(valid, parent_sse - left_sse - right_sse, -np.inf)
        pos = int(np.argmax(gain))
        g = float(gain[pos])
        if g > _MIN_GAIN and (best is None or g > best[0]):
            best = (g, j, 0.5 * (xs[pos] + xs[pos + 1]))
    return best


def grow_tree(X, y, max_depth, min_samples_leaf, max_features=None, rng=None) -> Tree:
    """Depth-first deterministic tree construction."""
    n_features = X.shape[1]
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(rows):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y[rows].mean()))
        return len(feature) - 1

    stack = [(new_node(np.arange(len(y))), np.arange(len(y)), 0)]
    while stack:
        node, rows, depth = stack.pop()
        if depth >= max_depth or len(rows) < 2 * min_samples_leaf:
            continue
        if max_features is None or max_features >= n_features:
            candidates = range(n_features)
        else:
            candidates = np.sort(rng.choice(n_features, size=max_features, replace=False))
        split = _best_split(X, y, rows, candidates, min_samples_leaf)
        if split is None:
            continue
        _, j, thr = split
        go_left = X[rows, j] <= thr
        feature[node] = j
        threshold[node] = thr
        left[node] = new_node(rows[go_left])
        right[node] = new_node(rows[~go_left])
        stack.append((right[node], rows[~go_left], depth + 1))
        stack.append((left[node], rows[go_left], depth + 1))
    return Tree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=np.asarray(value, dtype=float),
    )


@dataclass
class GBTState:
    base: float
    trees: list[Tree]
    learning_rate: float


class GradientBoostedTrees(Learner):
    """Squared-error gradient boosting on exact greedy trees."""

    kind = "gbt"

    def validate_params(self, params):
        merged = self._check_params(params, {
            "n_trees": 100,
            "max_depth": 3,
            "learning_rate": 0.1,
            "min_samples_leaf": 1,
        })
        if not isinstance(merged["n_trees"], int) or merged["n_trees"] < 1:
            raise ModelError(f"gbt: n_trees must be >= 1, got {merged['n_trees']!r}")
        if not isinstance(merged["max_depth"], int) or merged["max_depth"] < 1:
            raise ModelError(f"gbt: max_depth must be >= 1, got {merged['max_depth']!r}")
        if merged["learning_rate"] <= 0:
            raise ModelError(f"gbt: learning_rate must be > 0, got {merged['learning_rate']!r}")
        if not isinstance(merged["min_samples_leaf"], int) or merged["min_samples_leaf"] < 1:
            raise ModelError(f"gbt: min_samples_leaf must be >= 1, got {merged['min_samples_leaf']!r}")
        return merged

    def fit_arrays(self, X, y, params, rng, matrix):
        base = float(y.mean())
        pred = np.full(len(y), base)
        trees: list[Tree] = []
        lr = float(params["learning_rate"])
        for _ in range(params["n_trees"]):
            tree = grow_tree(X, y - pred, params["max_depth"], params["min_samples_leaf"])
            trees.append(tree)
            pred = pred + lr * tree.predict(X)
        return GBTState(base=base, trees=trees, learning_rate=lr)

    def predict_arrays(self, state, X):
        out = np.full(len(X), state.base)
        for tree in state.trees:
            out += state.learning_rate * tree.predict(X)
        return out


@dataclass
class ForestState:
    trees: list[Tree]


class RandomForest(Learner):
    """Bagged exact greedy trees with per-split feature subsampling."""

    kind = "random-forest"

    def validate_params(self, params):
        merged = self._check_params(params, {
            "n_trees": 100,
            "max_depth": 10,
            "min_samples_leaf": 1,
            "max_features": "sqrt",
        })
        if not isinstance(merged["n_trees"], int) or merged["n_trees"] < 1:
            raise ModelError(f"random-forest: n_trees must be >= 1, got {merged['n_trees']!r}")
        if not isinstance(merged["max_depth"], int) or merged["max_depth"] < 1:
            raise ModelError(f"random-forest: max_depth must be >= 1, got {merged['max_depth']!r}")
        if not isinstance(merged["min_samples_leaf"], int) or merged["min_samples_leaf"] < 1:
            raise ModelError(
                f"random-forest: min_samples_leaf must be >= 1, got {merged['min_samples_leaf']!r}"
            )
        mf = merged["max_features"]
        if mf not in ("sqrt", None) and (not isinstance(mf, int) or mf < 1):
            raise ModelError(f"random-forest: max_features must be 'sqrt', None, or int >= 1, got {mf!r}")
        return merged

    def fit_arrays(self, X, y, params, rng, matrix):
        n, p = X.shape
        mf = params["max_features"]
        if mf == "sqrt":
            mf = max(1, int(np.sqrt(p)))
        elif isinstance(mf, int):
            mf = min(mf, p)
        trees = []
        for _ in range(params["n_trees"]):
            rows = rng.integers(0, n, size=n)
            trees.append(grow_tree(
                X[rows], y[rows], params["max_depth"], params["min_samples_leaf"],
                max_features=mf, rng=rng,
            ))
        return ForestState(trees=trees)

    def predict_arrays(self, state, X):
        out = np.zeros(len(X))
        for tree in state.trees:
            out += tree.predict(X)
        return out / len(state.trees)


register(GradientBoostedTrees())
register(RandomForest())

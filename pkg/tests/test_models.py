import numpy as np
import pandas as pd
import pytest

from retrainbench.features import FeatureBuilder, FeatureConfig
from retrainbench.models import ModelError, ModelSpec, fit, predict
from retrainbench.models.mlp import loss_and_grads
from retrainbench.models.trees import grow_tree
from retrainbench.panel import load_panel

from conftest import seasonal_panel


def panel_from_values(values, start="2022-01-03"):
    if not isinstance(values, dict):
        values = {"s0": values}
    parts = []
    for sid, vals in values.items():
        dates = pd.date_range(start, periods=len(vals), freq="D")
        parts.append(pd.DataFrame({"unique_id": sid, "ds": dates, "y": vals}))
    return load_panel(pd.concat(parts, ignore_index=True), frequency=7)


def full_slice(panel):
    return panel.slice({sid: panel.length(sid) for sid in panel.ids})


def doubling_panel():
    # Every series satisfies y_t = 2 * y_{t-1} exactly.
    a = [2.0**k for k in range(8)]
    b = [3.0 * 2.0**k for k in range(8)]
    return panel_from_values({"a": a, "b": b})


@pytest.fixture(scope="module")
def train_matrix():
    panel = seasonal_panel(4, 80, seed=9)
    cfg = FeatureConfig(lags=(1, 7), rolling_windows=(7,), calendar=("dayofweek",))
    builder = FeatureBuilder(panel, cfg)
    return builder.build_training(full_slice(panel))


def test_unknown_kind_rejected():
    with pytest.raises(ModelError, match="unknown model kind"):
        ModelSpec("prophetish")


def test_hyperparameter_validation():
    with pytest.raises(ModelError, match="penalty"):
        ModelSpec("pooled-ridge", {"penalty": -1.0})
    with pytest.raises(ModelError, match="max_depth"):
        ModelSpec("gbt", {"max_depth": 0})
    with pytest.raises(ModelError, match="hidden"):
        ModelSpec("mlp", {"hidden": [0]})
    with pytest.raises(ModelError, match="unknown hyperparameters"):
        ModelSpec("gbt", {"gamma": 1.0})


def test_seasonal_naive_fit_is_trivial(train_matrix):
    model = fit(ModelSpec("seasonal-naive"), train_matrix)
    assert model.state.season_length == 7
    assert model.fit_seconds >= 0.0


def test_seasonal_naive_predictions_repeat_last_cycle():
    values = list(np.arange(1.0, 22.0))  # three full weeks
    panel = panel_from_values(values)
    builder = FeatureBuilder(panel, FeatureConfig(lags=(1,)))
    model = fit(ModelSpec("seasonal-naive"), builder.build_training(full_slice(panel)))
    points, seconds = predict(model, full_slice(panel), 28)
    expected = np.tile(values[-7:], 4)
    assert np.array_equal(points[0], expected)
    assert seconds >= 0.0


def test_seasonal_naive_one_step_errors_match_scaling_benchmark():
    panel = seasonal_panel(1, 60, seed=5)
    builder = FeatureBuilder(panel, FeatureConfig(lags=(1,)))
    sid = panel.ids[0]
    y = panel.values(sid)
    model = fit(ModelSpec("seasonal-naive"), builder.build_training(full_slice(panel)))
    for end in range(30, 50):
        pred, _ = predict(model, panel.slice({sid: end}), 1)
        assert pred[0, 0] == y[end - 7]
        assert y[end] - pred[0, 0] == y[end] - y[end - 7]


def test_pooled_linear_recovers_exact_coefficient():
    panel = doubling_panel()
    builder = FeatureBuilder(panel, FeatureConfig(lags=(1,)))
    model = fit(ModelSpec("pooled-linear"), builder.build_training(full_slice(panel)))
    assert model.state.coef[0] == pytest.approx(2.0, abs=1e-9)
    assert model.state.intercept == pytest.approx(0.0, abs=1e-9)


def test_pooled_linear_recursive_prediction():
    panel = doubling_panel()
    builder = FeatureBuilder(panel, FeatureConfig(lags=(1,)))
    model = fit(ModelSpec("pooled-linear"), builder.build_training(full_slice(panel)))
    points, _ = predict(model, panel.slice({"a": 2, "b": 1}), 2)
    # Series "b" ends at value 3: recursion gives 6 then 12.
    assert points[1] == pytest.approx([6.0, 12.0], abs=1e-9)


def test_pooled_linear_singular_design_advises_ridge():
    panel = seasonal_panel(3, 60, seed=1)
    # A rolling window of 1 duplicates lag 1 exactly.
    builder = FeatureBuilder(panel, FeatureConfig(lags=(1,), rolling_windows=(1,)))
    with pytest.raises(ModelError, match="pooled-ridge"):
        fit(ModelSpec("pooled-linear"), builder.build_training(full_slice(panel)))


def test_pooled_ridge_handles_collinear_design():
    panel = seasonal_panel(3, 60, seed=1)
    builder = FeatureBuilder(panel, FeatureConfig(lags=(1,), rolling_windows=(1,)))
    model = fit(ModelSpec("pooled-ridge", {"penalty": 1.0}), builder.build_training(full_slice(panel)))
    points, _ = predict(model, full_slice(panel), 3)
    assert np.isfinite(points).all()


def test_horizon_zero_gives_empty_forecast(train_matrix):
    panel = train_matrix.builder.panel
    model = fit(ModelSpec("pooled-ridge"), train_matrix)
    points, seconds = predict(model, full_slice(panel), 0)
    assert points.shape == (panel.n_series, 0)
    assert seconds >= 0.0


def test_insufficient_history_names_series(train_matrix):
    panel = train_matrix.builder.panel
    model = fit(ModelSpec("pooled-ridge"), train_matrix)
    sl = panel.slice({sid: (3 if sid == panel.ids[0] else 40) for sid in panel.ids})
    with pytest.raises(Exception, match=panel.ids[0]):
        predict(model, sl, 2)


@pytest.mark.parametrize("kind,params", [
    ("mlp", {"hidden": [8], "epochs": 20}),
    ("gbt", {"n_trees": 10, "max_depth": 2}),
    ("random-forest", {"n_trees": 10, "max_depth": 4}),
])
def test_same_seed_bit_identical(kind, params, train_matrix):
    panel = train_matrix.builder.panel
    a = fit(ModelSpec(kind, params, seed=42), train_matrix)
    b = fit(ModelSpec(kind, params, seed=42), train_matrix)
    pa, _ = predict(a, full_slice(panel), 5)
    pb, _ = predict(b, full_slice(panel), 5)
    assert pa.tobytes() == pb.tobytes()


def test_mlp_gradients_match_finite_differences():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(10, 3))
    y = rng.normal(size=10)
    weights = [rng.normal(scale=0.5, size=(3, 4)), rng.normal(scale=0.5, size=(4, 1))]
    biases = [rng.normal(scale=0.1, size=4), rng.normal(scale=0.1, size=1)]

    _, grads_w, grads_b = loss_and_grads(weights, biases, X, y)

    eps = 1e-6
    for params, grads in ((weights, grads_w), (biases, grads_b)):
        for arr, grad in zip(params, grads):
            flat = arr.reshape(-1)
            for idx in range(flat.size):
                orig = flat[idx]
                flat[idx] = orig + eps
                up, *_ = loss_and_grads(weights, biases, X, y)
                flat[idx] = orig - eps
                down, *_ = loss_and_grads(weights, biases, X, y)
                flat[idx] = orig
                numeric = (up - down) / (2 * eps)
                analytic = grad.reshape(-1)[idx]
                denom = max(abs(numeric), abs(analytic), 1e-8)
                assert abs(numeric - analytic) / denom < 1e-4


def test_mlp_nonfinite_loss_reports_epoch():
    panel = seasonal_panel(2, 40, seed=2)
    builder = FeatureBuilder(panel, FeatureConfig(lags=(1, 2)))
    matrix = builder.build_training(full_slice(panel))
    spec = ModelSpec("mlp", {"hidden": [16], "epochs": 50, "learning_rate": 1e6})
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(ModelError, match="epoch"):
            fit(spec, matrix)


def test_gbt_single_depth_one_tree_recovers_step():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0.0, 0.0, 5.0, 5.0])
    tree = grow_tree(X, y, max_depth=1, min_samples_leaf=1)
    assert tree.feature[0] == 0
    assert tree.threshold[0] == pytest.approx(1.5)
    assert np.array_equal(tree.predict(X), y)


def test_gbt_learner_exact_on_step_function(train_matrix):
    panel = panel_from_values({"a": [0.0, 0.0, 1.0, 5.0, 5.0, 6.0]})
    builder = FeatureBuilder(panel, FeatureConfig(lags=(1,)))
    matrix = builder.build_training(full_slice(panel))
    spec = ModelSpec("gbt", {"n_trees": 1, "max_depth": 1, "learning_rate": 1.0})
    model = fit(spec, matrix)
    # One depth-1 tree splits lag values at the step and reproduces leaf means.
    state = model.state
    assert len(state.trees) == 1
    assert state.trees[0].feature[0] == 0


def test_gbt_reduces_training_error(train_matrix):
    few = fit(ModelSpec("gbt", {"n_trees": 2, "max_depth": 2}), train_matrix)
    many = fit(ModelSpec("gbt", {"n_trees": 40, "max_depth": 2}), train_matrix)

    def mse(model):
        from retrainbench.models import get_learner
        pred = get_learner("gbt").predict_arrays(model.state, train_matrix.X)
        return float(np.mean((pred - train_matrix.y) ** 2))

    assert mse(many) < mse(few)


def test_random_forest_prediction_is_tree_average(train_matrix):
    from retrainbench.models import get_learner
    model = fit(ModelSpec("random-forest", {"n_trees": 5, "max_depth": 3}), train_matrix)
    learner = get_learner("random-forest")
    X = train_matrix.X[:20]
    stacked = np.mean([t.predict(X) for t in model.state.trees], axis=0)
    assert np.allclose(learner.predict_arrays(model.state, X), stacked)


def test_different_seeds_change_stochastic_models(train_matrix):
    panel = train_matrix.builder.panel
    a = fit(ModelSpec("random-forest", {"n_trees": 5, "max_depth": 4}, seed=1), train_matrix)
    b = fit(ModelSpec("random-forest", {"n_trees": 5, "max_depth": 4}, seed=2), train_matrix)
    pa, _ = predict(a, full_slice(panel), 3)
    pb, _ = predict(b, full_slice(panel), 3)
    assert not np.array_equal(pa, pb)


def test_empty_matrix_rejected(train_matrix):
    import dataclasses
    empty = dataclasses.replace(
        train_matrix,
        X=train_matrix.X[:0],
        y=train_matrix.y[:0],
        series_ids=train_matrix.series_ids[:0],
        timestamps=train_matrix.timestamps[:0],
    )
    with pytest.raises(ModelError, match="empty"):
        fit(ModelSpec("pooled-linear"), empty)


def test_vectorized_predict_matches_single_series_feature_rows():
    from retrainbench.models import get_learner
    panel = seasonal_panel(3, 90, seed=17)
    cfg = FeatureConfig(lags=(1, 2, 7), rolling_windows=(7,), expanding_mean=True,
                        calendar=("dayofweek",))
    builder = FeatureBuilder(panel, cfg)
    ends = {sid: 70 for sid in panel.ids}
    sl = panel.slice(ends)
    model = fit(ModelSpec("pooled-ridge", {"penalty": 0.5}), builder.build_training(sl))
    learner = get_learner("pooled-ridge")
    points, _ = predict(model, sl, 4)
    for i, sid in enumerate(panel.ids):
        priors = []
        for step in range(1, 5):
            row = builder.feature_row_for_horizon(sl, sid, step, prior_predictions=priors)
            priors.append(float(learner.predict_arrays(model.state, row[None])[0]))
        assert np.allclose(points[i], priors, atol=1e-12)

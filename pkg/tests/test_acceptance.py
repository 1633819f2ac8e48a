"""Acceptance gate: one test per release criterion, each printing a verdict.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
pass lines as they complete.
"""

import math
import time
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
import yaml
from scipy.stats import chi2

from retrainbench.backtest import ScenarioConfig, make_schedule
from retrainbench.cli import main
from retrainbench.conformal import DEFAULT_LEVELS
from retrainbench.cost import CostModel, estimate_cost
from retrainbench.ensemble import Leaderboard, LeaderboardRow, combine_results, select_pool
from retrainbench.metrics import rmsse, smql, sql
from retrainbench.stats import RankMatrix, friedman

from conftest import coverage_of, make_result

REPO_ROOT = Path(__file__).resolve().parents[1]
SYNTHETIC_CONFIG = REPO_ROOT / "configs" / "synthetic.yaml"


def report(criterion, detail):
    print(f"[PASS] criterion {criterion}: {detail}")


@pytest.fixture(scope="module")
def synthetic_run(tmp_path_factory):
    """Two full runs of the bundled synthetic config, with wall times."""
    outs = []
    for tag in ("first", "second"):
        out = tmp_path_factory.mktemp(f"synthetic_{tag}")
        t0 = time.perf_counter()
        code = main(["run", str(SYNTHETIC_CONFIG), "--out", str(out)])
        elapsed = time.perf_counter() - t0
        assert code == 0
        outs.append((out, elapsed))
    return outs


def test_criterion_1_metric_oracles():
    t0 = time.perf_counter()
    insample = [1.0, 2.0, 3.0, 4.0]
    assert rmsse([5.0, 6.0], [4.0, 4.0], insample, s=1) == pytest.approx(
        math.sqrt(2.5), abs=1e-12
    )
    assert sql([3.0], [1.0], 0.9, insample, s=1) == pytest.approx(1.8, abs=1e-12)

    rng = np.random.default_rng(1)
    actuals = rng.uniform(1, 9, size=5)
    quantiles = np.sort(rng.uniform(0, 10, size=(5, 14)), axis=1)
    combined = smql(actuals, quantiles, DEFAULT_LEVELS, insample * 5, s=1)
    parts = [
        sql(actuals, quantiles[:, i], q, insample * 5, s=1)
        for i, q in enumerate(DEFAULT_LEVELS)
    ]
    assert combined == pytest.approx(float(np.mean(parts)), abs=1e-12)
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0
    report(1, f"rmsse=sqrt(2.5), sql=1.8, smql=mean(sql) within 1e-12 ({elapsed:.3f}s)")


def test_criterion_2_scheduler_arithmetic():
    t0 = time.perf_counter()
    retrain_set = (7, 14, 21, 30, 60, 90, 120, 150, 180, 364)
    fit_counts = []
    for r in retrain_set:
        cfg = ScenarioConfig(horizon=28, test_length=364, retrain_window=r, frequency=7)
        sched = make_schedule(cfg)
        assert len(sched.origins) == 337
        assert sched.fit_count == math.ceil(337 / r)
        fit_counts.append(sched.fit_count)
    assert all(a >= b for a, b in zip(fit_counts, fit_counts[1:]))
    assert fit_counts[-1] == 1  # no-retraining scenario fits exactly once
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0
    report(2, f"337 origins; fit counts {fit_counts} nonincreasing; r=T fits once ({elapsed:.3f}s)")


def test_criterion_3_ensemble_ct_additivity():
    t0 = time.perf_counter()
    a = make_result("a", points=[[[0.0]]], fit_seconds=15417.0)
    b = make_result("b", points=[[[0.0]]], fit_seconds=44429.0)
    c = make_result("c", points=[[[0.0]]], fit_seconds=11373.0)
    assert combine_results([a, b], "two").ledger.ct_seconds == 59846.0
    assert combine_results([a, b, c], "three").ledger.ct_seconds == 71219.0
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0
    report(3, f"15417+44429=59846 and +11373=71219 exactly ({elapsed:.3f}s)")


def test_criterion_4_cost_reconstruction():
    t0 = time.perf_counter()
    daily = estimate_cost(11373.0, CostModel(3.5, 28298, 10**9))
    assert abs(daily - 390_732.0) / 390_732.0 < 0.001
    weekly = estimate_cost(236.0, CostModel(3.5, 15053, 10**9))
    assert abs(weekly - 15_234.0) / 15_234.0 < 0.005
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0
    report(4, f"daily cell {daily:,.0f} vs 390,732; weekly {weekly:,.0f} vs 15,234 ({elapsed:.3f}s)")


def test_criterion_5_conformal_coverage(coverage_run):
    t0 = time.perf_counter()
    cov80, cells = coverage_of(coverage_run, 0.100, 0.900)
    cov95, _ = coverage_of(coverage_run, 0.025, 0.975)
    assert cells >= 5000
    assert abs(cov80 - 0.80) <= 0.03
    assert abs(cov95 - 0.95) <= 0.03
    elapsed = time.perf_counter() - t0
    report(5, f"80% interval covers {cov80:.3f}, 95% covers {cov95:.3f} over {cells} cells")


def test_criterion_6_pool_selection_fidelity():
    t0 = time.perf_counter()
    board = Leaderboard(tuple(LeaderboardRow(*row) for row in (
        ("lr", 0.760, 0.269, 11373.0),
        ("xgboost", 0.739, 0.246, 15417.0),
        ("lgbm", 0.755, 0.247, 44429.0),
        ("catboost", 0.926, 0.280, 10424.0),
        ("mlp", 0.804, 0.264, 17584.0),
        ("tcn", 0.847, 0.271, 33364.0),
        ("nbeatsx", 0.799, 0.263, 21226.0),
        ("nhits", 0.812, 0.267, 21969.0),
    )))
    accuracy = ("xgboost", "lgbm", "lr", "nbeatsx", "mlp")
    by_time = ("catboost", "lr", "xgboost", "mlp", "nbeatsx")
    for k in (2, 3, 4, 5):
        assert select_pool(board, "accuracy", k).members == accuracy[:k]
        assert select_pool(board, "time", k).members == by_time[:k]
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0
    report(6, f"accuracy and time pools match the reference composition for k=2..5 ({elapsed:.3f}s)")


def test_criterion_7_friedman_nemenyi():
    t0 = time.perf_counter()
    identical = RankMatrix(values=np.tile([3.0, 1.0, 7.0, 2.0], (3, 1)).T, treatments=(0, 1, 2))
    res = friedman(identical)
    assert res.statistic == 0.0 and res.pvalue == 1.0

    ordered = RankMatrix(
        values=np.array([[1.0, 2.0, 3.0]] * 4) * np.array([[1.0], [2.0], [3.0], [4.0]]),
        treatments=("a", "b", "c"),
    )
    res = friedman(ordered)
    assert res.statistic == pytest.approx(8.0, abs=1e-9)
    assert res.pvalue == pytest.approx(float(chi2.sf(8.0, 2)), abs=1e-12)
    assert res.pvalue == pytest.approx(0.0183, abs=1e-4)

    rng = np.random.default_rng(123)
    transforms = (
        lambda x, a, b: a * x + b,
        lambda x, a, b: a * x**3 + b,
        lambda x, a, b: a * np.arctan(x) + b,
    )
    for _ in range(100):
        values = rng.normal(size=(rng.integers(3, 9), rng.integers(2, 6)))
        base = friedman(RankMatrix(values=values, treatments=tuple(range(values.shape[1]))))
        warped = values.copy()
        for row in range(values.shape[0]):
            f = transforms[rng.integers(len(transforms))]
            warped[row] = f(values[row], rng.uniform(0.5, 2.0), rng.normal())
        after = friedman(RankMatrix(values=warped, treatments=tuple(range(values.shape[1]))))
        assert after.statistic == pytest.approx(base.statistic, abs=1e-9)
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0
    report(7, f"ties => (0, 1); ordered 4x3 => 8 (p=0.0183); 100 invariance trials ({elapsed:.2f}s)")


def test_criterion_8_end_to_end_determinism(synthetic_run):
    (out_a, time_a), (out_b, time_b) = synthetic_run
    assert time_a < 600 and time_b < 600

    cfg = yaml.safe_load(SYNTHETIC_CONFIG.read_text())
    assert len(cfg["models"]) >= 3
    assert len(cfg["ensembles"]["criteria"]) * len(cfg["ensembles"]["sizes"]) >= 2
    assert len(cfg["scenario"]["retrain_set"]) == 5

    baseline = str(cfg["scenario"]["baseline"])
    rel = pd.read_csv(out_a / "relative_metrics.csv")
    assert (rel[baseline] == 1.0).all()

    bytes_a = {p.name: p.read_bytes() for p in sorted((out_a / "forecasts").glob("*.csv"))}
    bytes_b = {p.name: p.read_bytes() for p in sorted((out_b / "forecasts").glob("*.csv"))}
    assert bytes_a and bytes_a == bytes_b
    report(8, (
        f"two runs in {time_a:.0f}s/{time_b:.0f}s; baseline-relative exactly 1.0; "
        f"{len(bytes_a)} forecast files byte-identical"
    ))


def test_criterion_9_qualitative_trends(synthetic_run):
    (out_a, _), _ = synthetic_run
    metrics = pd.read_csv(out_a / "metrics.csv")
    r_max = metrics.r.max()

    for method, grp in metrics.groupby("method"):
        grp = grp.sort_values("r")
        fits = grp.fit_count.to_numpy()
        assert (np.diff(fits) <= 0).all(), f"{method} fit counts not monotone"
        assert fits[0] > fits[-1], f"{method} fit counts never decrease"
        # Modeled cost at a fixed per-fit time inherits the fit-count shape.
        modeled_cost = fits * 1.0
        assert (np.diff(modeled_cost) <= 0).all()

    degradations = {}
    ensembles = metrics[metrics.method.str.startswith("ens-")]
    assert ensembles.method.nunique() >= 2
    for method, grp in ensembles.groupby("method"):
        grp = grp.set_index("r")
        change = grp.loc[r_max, "rmsse"] / grp.loc[1, "rmsse"] - 1.0
        degradations[method] = change
        assert abs(change) <= 0.10, f"{method} degrades {change:+.1%} from r=1 to r={r_max}"
    worst = max(degradations.values(), key=abs)
    report(9, (
        f"fit counts fall monotonically in r for all methods; worst ensemble "
        f"RMSSE change r=1 -> r={r_max} is {worst:+.2%} (<= 10%)"
    ))

"""Report emission: metric tables, baseline-relative tables, costs, rank tests.

Tables are schema-stable: fixed column names, methods in grid order (base
models first, then ensembles), retrain scenarios ascending. Cost values
are rounded to two places only here; everything upstream stays at full
precision.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from retrainbench.backtest import GridResult, write_store
from retrainbench.config import RunConfig
from retrainbench.cost import CostModel, estimate_cost
from retrainbench.metrics import MetricError, ScenarioScore, normalize_to_baseline, score_scenario
from retrainbench.panel import SeriesPanel
from retrainbench.stats import RankMatrix, compare_to_baseline, friedman, nemenyi_cd

logger = logging.getLogger(__name__)

_METRICS = ("rmsse", "smql", "ct_seconds", "cost")


def build_scores(grid: GridResult, panel: SeriesPanel, s_point: int, s_prob: int):
    return {
        key: score_scenario(res, panel, s_point, s_prob)
        for key, res in grid.results.items()
    }


def _cell_values(grid, scores, cost_model) -> dict[str, dict[tuple[str, int], float]]:
    values: dict[str, dict[tuple[str, int], float]] = {m: {} for m in _METRICS}
    for key, res in grid.results.items():
        score: ScenarioScore = scores[key]
        values["rmsse"][key] = score.rmsse.value
        values["smql"][key] = score.smql.value
        values["ct_seconds"][key] = res.ledger.ct_seconds
        values["cost"][key] = estimate_cost(res.ledger.ct_seconds, cost_model)
    return values


def _relative(values: dict[tuple[str, int], float], baseline_r: int) -> dict[tuple[str, int], float]:
    with_baseline = {m for (m, r) in values if r == baseline_r}
    skipped = {m for (m, _) in values} - with_baseline
    if skipped:
        logger.warning("no baseline cell for %s; omitted from relative tables", sorted(skipped))
    filtered = {k: v for k, v in values.items() if k[0] in with_baseline}
    if not filtered:
        return {}
    return normalize_to_baseline(filtered, baseline_r)


def emit_report(grid: GridResult, panel: SeriesPanel, cfg: RunConfig, out_dir) -> Path:
    """Write the full artifact set for one grid run; returns the output dir."""
    if not grid.results:
        raise MetricError("result store is empty; nothing to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    write_store(grid, out)
    scores = build_scores(grid, panel, cfg.scenario.s_point, cfg.scenario.s_prob)
    cost_model = CostModel(
        rate_per_hour=cfg.rate_per_hour,
        dataset_series=panel.n_series,
        target_series=cfg.target_series or panel.n_series,
    )
    values = _cell_values(grid, scores, cost_model)
    relative = {m: _relative(values[m], grid.baseline_r) for m in _METRICS}

    methods = [m for m in grid.methods if any((m, r) in grid.results for r in grid.retrain_set)]
    rs = sorted(grid.retrain_set)

    # Absolute metric table, one row per (method, r).
    rows = []
    for method in methods:
        for r in rs:
            key = (method, r)
            if key not in grid.results:
                continue
            res = grid.results[key]
            score = scores[key]
            rows.append({
                "method": method,
                "r": r,
                "rmsse": score.rmsse.value,
                "smql": score.smql.value,
                "ct_seconds": res.ledger.ct_seconds,
                "fit_seconds": res.ledger.fit_seconds,
                "predict_seconds": res.ledger.predict_seconds,
                "fit_count": res.ledger.fit_count,
                "cost": round(values["cost"][key], 2),
                "rmsse_excluded": score.rmsse.n_excluded,
                "smql_excluded": score.smql.n_excluded,
            })
    pd.DataFrame(rows).to_csv(out / "metrics.csv", index=False)

    # Relative tables: one row per (method, metric), one column per r.
    rel_rows = []
    for method in methods:
        for metric in _METRICS:
            row: dict = {"method": method, "metric": metric}
            for r in rs:
                row[str(r)] = relative[metric].get((method, r), np.nan)
            rel_rows.append(row)
    pd.DataFrame(rel_rows).to_csv(out / "relative_metrics.csv", index=False)

    cost_rows = []
    for method in methods:
        for r in rs:
            key = (method, r)
            if key not in grid.results:
                continue
            cost_rows.append({
                "method": method,
                "r": r,
                "ct_seconds": values["ct_seconds"][key],
                "cost": round(values["cost"][key], 2),
                "relative_cost": relative["cost"].get(key, np.nan),
            })
    pd.DataFrame(cost_rows).to_csv(out / "costs.csv", index=False)

    # Plot-ready long format for external plotting.
    plot_rows = []
    for method in methods:
        for r in rs:
            key = (method, r)
            if key not in grid.results:
                continue
            for metric in _METRICS:
                plot_rows.append({
                    "method": method,
                    "r": r,
                    "metric": metric,
                    "value": values[metric][key],
                    "relative_value": relative[metric].get(key, np.nan),
                })
    pd.DataFrame(plot_rows).to_csv(out / "plot_data.csv", index=False)

    if grid.leaderboard is not None:
        pd.DataFrame([
            {"model": r.model, "rmsse": r.rmsse, "smql": r.smql, "ct_seconds": r.ct_seconds}
            for r in grid.leaderboard.rows
        ]).to_csv(out / "leaderboard.csv", index=False)
    if grid.ensembles:
        pd.DataFrame([
            {
                "name": name,
                "criterion": spec.criterion,
                "size": spec.size,
                "members": ";".join(spec.members),
            }
            for name, spec in grid.ensembles.items()
        ]).to_csv(out / "ensembles.csv", index=False)

    _emit_stats(grid, scores, cfg, out / "stats")

    (out / "effective_config.yaml").write_text(yaml.safe_dump(cfg.effective, sort_keys=False))
    if grid.failures:
        payload = [
            {"method": m, "r": r, "error": msg} for (m, r), msg in sorted(grid.failures.items())
        ]
        (out / "failures.json").write_text(json.dumps(payload, indent=2))
    return out


def _emit_stats(grid: GridResult, scores, cfg: RunConfig, stats_dir: Path) -> None:
    """Friedman-Nemenyi across retrain scenarios, per method and metric.

    Blocks default to individual series (per-series means over origins);
    ``stats_blocks: cells`` switches to raw (series, origin) cells. Blocks
    with a missing value in any treatment drop listwise. Uses the
    classical chi-square Friedman form.
    """
    stats_dir.mkdir(parents=True, exist_ok=True)
    suffix = "_by_series" if cfg.stats_blocks == "series" else "_cells"
    cd_rows = []
    for metric in ("rmsse", "smql"):
        attr = metric + suffix
        payload = {}
        for method in grid.methods:
            rs = [r for r in sorted(grid.retrain_set) if (method, r) in grid.results]
            if len(rs) < 2 or grid.baseline_r not in rs:
                continue
            mat = np.column_stack([
                getattr(scores[(method, r)], attr).reshape(-1) for r in rs
            ])
            keep = np.isfinite(mat).all(axis=1)
            mat = mat[keep]
            if len(mat) < 2:
                logger.warning("stats skipped for %s/%s: fewer than 2 complete blocks", method, metric)
                continue
            matrix = RankMatrix(values=mat, treatments=tuple(rs))
            result = friedman(matrix)
            cd = nemenyi_cd(len(rs), len(mat), cfg.stats_alpha)
            verdicts = compare_to_baseline(rs, result.mean_ranks, cd, grid.baseline_r)
            payload[method] = {
                "statistic": result.statistic,
                "pvalue": result.pvalue,
                "mean_ranks": {str(r): float(v) for r, v in zip(rs, result.mean_ranks)},
                "cd": cd,
                "alpha": cfg.stats_alpha,
                "baseline_r": grid.baseline_r,
                "n_blocks": result.n_blocks,
                "verdicts": {str(r): verdicts[r] for r in rs},
            }
            for r, rank in zip(rs, result.mean_ranks):
                cd_rows.append({
                    "method": method,
                    "metric": metric,
                    "r": r,
                    "mean_rank": float(rank),
                    "cd": cd,
                })
        (stats_dir / f"friedman_{metric}.json").write_text(json.dumps(payload, indent=2))
    pd.DataFrame(cd_rows, columns=["method", "metric", "r", "mean_rank", "cd"]).to_csv(
        stats_dir / "cd_diagram.csv", index=False
    )

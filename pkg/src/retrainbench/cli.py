"""Command-line entry point: run an end-to-end evaluation from one config.

Exit codes: 0 on success (including partial scenario failures when at
least one scenario succeeded), 1 when every scenario failed, 2 on
configuration validation errors. Validation and runtime problems are
printed as JSON on stderr so callers can machine-read them.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from retrainbench.backtest import run_grid
from retrainbench.config import ConfigError, RunConfig, load_run_config
from retrainbench.features import FeatureBuilder
from retrainbench.panel import PanelError, filter_min_length, load_panel
from retrainbench.report import emit_report

__all__ = ["main", "run_pipeline"]

logger = logging.getLogger(__name__)

WORKERS_ENV = "RETRAINBENCH_WORKERS"


def _required_length(cfg: RunConfig) -> int:
    """Shortest usable series: test span plus warm-up, calibration, and horizon."""
    warm = max(cfg.feature_config.warmup, cfg.frequency)
    h = cfg.scenario.horizon
    return cfg.scenario.test_length + warm + cfg.conformal_multiple * h + h


def run_pipeline(cfg: RunConfig, out_dir: Path) -> int:
    panel = load_panel(
        cfg.panel_path,
        schema=cfg.schema,
        frequency=cfg.frequency,
        statics=cfg.statics_path,
        exogenous=cfg.exog_path,
    )
    panel = filter_min_length(panel, cfg.min_length)

    # Independent feasibility filter: series must also be long enough for
    # the expanding backtest and its conformal calibration window.
    needed = _required_length(cfg)
    feasible = filter_min_length(panel, needed - 1)
    if feasible.n_series < panel.n_series:
        logger.warning(
            "dropped %d series shorter than %d observations required by the scenario",
            panel.n_series - feasible.n_series, needed,
        )
    panel = feasible

    # Conservative feature-window bound against the shortest training slice.
    shortest_train = min(panel.length(sid) for sid in panel.ids) - cfg.scenario.test_length
    window_need = max(cfg.feature_config.lags, default=0) + max(
        cfg.feature_config.rolling_windows, default=0
    )
    if window_need >= shortest_train:
        raise PanelError(
            f"feature windows need {window_need} observations but the shortest "
            f"training slice has {shortest_train}"
        )

    builder = FeatureBuilder(panel, cfg.feature_config)
    workers = int(os.environ.get(WORKERS_ENV, cfg.workers))
    grid = run_grid(
        panel,
        cfg.models,
        cfg.scenario,
        cfg.retrain_set,
        builder=builder,
        levels=cfg.levels,
        calibration_multiple=cfg.conformal_multiple,
        ensemble_criteria=cfg.ensemble_criteria,
        ensemble_sizes=cfg.ensemble_sizes,
        workers=workers,
    )

    if not grid.results:
        print(json.dumps({"error": "all scenarios failed", "failures": [
            {"method": m, "r": r, "error": msg} for (m, r), msg in sorted(grid.failures.items())
        ]}), file=sys.stderr)
        return 1

    emit_report(grid, panel, cfg, out_dir)
    n_cells = len(grid.results)
    print(f"wrote {n_cells} scenario cells to {out_dir}")
    if grid.failures:
        print(f"{len(grid.failures)} scenario cells failed; see failures.json", file=sys.stderr)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="retrainbench",
        description="Retraining-aware rolling-origin evaluation of global forecasting models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run the full pipeline from a config file")
    run_p.add_argument("config", help="path to the YAML run configuration")
    run_p.add_argument("--out", help="output directory (overrides config 'output')")
    run_p.add_argument("--verbose", action="store_true", help="log progress to stderr")
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s: %(message)s",
        stream=sys.stderr,
    )

    try:
        cfg = load_run_config(args.config)
    except ConfigError as exc:
        print(json.dumps({
            "error": "validation",
            "fields": [{"path": p, "message": m} for p, m in exc.errors],
        }), file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(json.dumps({"error": "config", "message": str(exc)}), file=sys.stderr)
        return 2

    out_dir = Path(args.out) if args.out else cfg.output
    if out_dir is None:
        print(json.dumps({
            "error": "validation",
            "fields": [{"path": "output", "message": "no output directory (config or --out)"}],
        }), file=sys.stderr)
        return 2

    try:
        return run_pipeline(cfg, out_dir)
    except (ValueError, RuntimeError) as exc:
        print(json.dumps({"error": "run", "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

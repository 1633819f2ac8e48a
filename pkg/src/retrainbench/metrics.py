"""Scaled accuracy metrics and baseline normalization.

RMSSE scales the test-window mean squared error by the in-sample
one-step squared error of a seasonal naive benchmark; SQL scales pinball
loss by the in-sample seasonal-naive absolute error, and SMQL averages
SQL over a quantile level set. Series whose scale denominator is zero
(constant at lag s) are excluded from aggregation rather than clamped:
an epsilon would silently dominate aggregates on intermittent data.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)


class MetricError(ValueError):
    """Metric computation contract violation."""


def _seasonal_scale(insample: np.ndarray, s: int, squared: bool) -> float:
    y = np.asarray(insample, dtype=float)
    n = len(y)
    if s < 1:
        raise MetricError(f"seasonal period must be >= 1, got {s}")
    if n <= s:
        raise MetricError(f"insample length {n} must exceed seasonal period {s}")
    diff = y[s:] - y[:-s]
    return float(np.mean(diff**2)) if squared else float(np.mean(np.abs(diff)))


def rmsse(actuals, forecasts, insample, s: int = 1) -> float:
    """Root mean squared scaled error; NaN marks a zero-scale exclusion."""
    a = np.asarray(actuals, dtype=float)
    f = np.asarray(forecasts, dtype=float)
    if a.shape != f.shape:
        raise MetricError(f"actuals shape {a.shape} != forecasts shape {f.shape}")
    scale = _seasonal_scale(insample, s, squared=True)
    if scale <= 0 or not math.isfinite(scale):
        return math.nan
    return math.sqrt(float(np.mean((a - f) ** 2)) / scale)


def pinball(actuals, quantile_values, q: float) -> float:
    """Unscaled pinball loss averaged over the horizon."""
    if not 0.0 < q < 1.0:
        raise MetricError(f"quantile level must lie in (0, 1), got {q}")
    a = np.asarray(actuals, dtype=float)
    v = np.asarray(quantile_values, dtype=float)
    diff = a - v
    return float(np.mean(np.where(diff >= 0, q * diff, (q - 1.0) * diff)))


def sql(actuals, quantile_values, q: float, insample, s: int = 1) -> float:
    """Scaled quantile (pinball) loss; NaN marks a zero-scale exclusion."""
    scale = _seasonal_scale(insample, s, squared=False)
    if scale <= 0 or not math.isfinite(scale):
        return math.nan
    return pinball(actuals, quantile_values, q) / scale


def smql(actuals, quantiles, levels: Sequence[float], insample, s: int = 1) -> float:
    """Scaled multi-quantile loss: mean of SQL over the level set.

    ``quantiles`` has shape (h, n_levels) aligned with ``levels``.
    """
    qmat = np.asarray(quantiles, dtype=float)
    levels = tuple(levels)
    if qmat.ndim != 2 or qmat.shape[1] != len(levels):
        raise MetricError(f"quantiles shape {qmat.shape} does not match {len(levels)} levels")
    values = [sql(actuals, qmat[:, i], q, insample, s) for i, q in enumerate(levels)]
    return float(np.mean(values))


@dataclass(frozen=True)
class Aggregate:
    """Unweighted mean over (series, origin) cells, with exclusion count."""

    value: float
    n_used: int
    n_excluded: int


def aggregate(values) -> Aggregate:
    """Mean of the finite entries; NaNs count as excluded cells."""
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise MetricError("nothing to aggregate")
    mask = np.isfinite(arr)
    n_excluded = int((~mask).sum())
    if not mask.any():
        raise MetricError("all cells excluded from aggregation")
    if n_excluded:
        logger.info("aggregation excluded %d of %d cells", n_excluded, arr.size)
    return Aggregate(value=float(arr[mask].mean()), n_used=int(mask.sum()), n_excluded=n_excluded)


def normalize_to_baseline(
    values: Mapping[tuple[str, int], float], baseline_r: int
) -> dict[tuple[str, int], float]:
    """Divide each (method, r) value by the method's baseline-r value."""
    methods = {m for m, _ in values}
    out: dict[tuple[str, int], float] = {}
    for m in methods:
        if (m, baseline_r) not in values:
            raise MetricError(f"method {m!r} has no baseline row at r={baseline_r}")
        base = values[(m, baseline_r)]
        if base == 0:
            raise MetricError(f"method {m!r} has zero baseline value at r={baseline_r}")
    for (m, r), v in values.items():
        out[(m, r)] = v / values[(m, baseline_r)]
    return out


@dataclass(frozen=True)
class ScenarioScore:
    """Dataset-level metrics for one (method, r) cell.

    ``*_by_series`` hold per-series means over origins (the default rank-test
    blocks); ``*_cells`` keep the raw (series, origin) values for cell-level
    blocking.
    """

    method: str
    retrain_window: int
    rmsse: Aggregate
    smql: Aggregate
    rmsse_by_series: np.ndarray
    smql_by_series: np.ndarray
    rmsse_cells: np.ndarray
    smql_cells: np.ndarray


def _scale_by_origin(y: np.ndarray, train_lengths: np.ndarray, s: int, squared: bool) -> np.ndarray:
    """Seasonal-naive scale of the expanding train window at each origin."""
    d = y[s:] - y[:-s]
    d = d**2 if squared else np.abs(d)
    prefix = np.concatenate(([0.0], np.cumsum(d)))
    # Train of length L covers y[0:L]; its diffs are d[0:L-s].
    counts = train_lengths - s
    if (counts < 1).any():
        raise MetricError("train window shorter than seasonal period")
    return prefix[counts] / counts


def score_scenario(result, panel, s_point: int = 1, s_prob: int = 1) -> ScenarioScore:
    """RMSSE and SMQL over all (series, origin) cells of a scenario.

    Scales use the expanding training window ending at each origin, so
    every cell is scored exactly as a standalone forecast would be.
    """
    n, n_origins, h = result.points.shape
    levels = np.asarray(result.levels.levels)
    T = result.test_length

    err_sq = np.mean((result.actuals - result.points) ** 2, axis=2)  # (n, O)
    diff = result.actuals[:, :, :, None] - result.quantiles  # (n, O, h, L)
    pin = np.where(diff >= 0, levels * diff, (levels - 1.0) * diff)
    pin_mean = pin.mean(axis=(2, 3))  # (n, O): mean over steps and levels

    rmsse_cells = np.empty((n, n_origins))
    smql_cells = np.empty((n, n_origins))
    for i, sid in enumerate(result.series_ids):
        y = panel.values(sid)
        train_lengths = len(y) - T + result.origins
        with np.errstate(divide="ignore", invalid="ignore"):
            sq = _scale_by_origin(y, train_lengths, s_point, squared=True)
            ab = _scale_by_origin(y, train_lengths, s_prob, squared=False)
            rmsse_cells[i] = np.sqrt(err_sq[i] / np.where(sq > 0, sq, np.nan))
            smql_cells[i] = pin_mean[i] / np.where(ab > 0, ab, np.nan)

    return ScenarioScore(
        method=result.method,
        retrain_window=result.retrain_window,
        rmsse=aggregate(rmsse_cells.reshape(-1)),
        smql=aggregate(smql_cells.reshape(-1)),
        rmsse_by_series=_row_means(rmsse_cells),
        smql_by_series=_row_means(smql_cells),
        rmsse_cells=rmsse_cells,
        smql_cells=smql_cells,
    )


def _row_means(cells: np.ndarray) -> np.ndarray:
    """Per-row mean of finite cells; NaN for rows with no finite cell."""
    mask = np.isfinite(cells)
    counts = mask.sum(axis=1)
    sums = np.where(mask, cells, 0.0).sum(axis=1)
    out = np.full(len(cells), np.nan)
    used = counts > 0
    out[used] = sums[used] / counts[used]
    return out

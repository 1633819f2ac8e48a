"""Forecast combination by simple averaging, and member-pool selection.

Pools are picked from a baseline leaderboard of the base models: the
accuracy criterion takes the k smallest RMSSE values, the time criterion
the k smallest computing times. A combined scenario's CT is the sum of
member CTs; the combination itself is charged zero seconds since it is
plain arithmetic on stored forecasts.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from retrainbench.backtest import CTLedger, ScenarioResult

CRITERIA = ("accuracy", "time")


class EnsembleError(ValueError):
    """Ensemble specification or alignment violation."""


@dataclass(frozen=True)
class EnsembleSpec:
    """A fixed pool of base-model names combined by the simple mean."""

    members: tuple[str, ...]
    criterion: str

    def __post_init__(self):
        if self.criterion not in CRITERIA:
            raise EnsembleError(f"criterion must be one of {CRITERIA}, got {self.criterion!r}")
        if len(self.members) < 2:
            raise EnsembleError(f"ensemble needs at least 2 members, got {self.members}")
        if len(set(self.members)) != len(self.members):
            raise EnsembleError(f"ensemble members must be distinct: {self.members}")

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def name(self) -> str:
        short = "acc" if self.criterion == "accuracy" else "time"
        return f"ens-{short}-{self.size}"


@dataclass(frozen=True)
class LeaderboardRow:
    model: str
    rmsse: float
    smql: float
    ct_seconds: float


@dataclass(frozen=True)
class Leaderboard:
    """Per base model: baseline-scenario RMSSE, SMQL, and CT."""

    rows: tuple[LeaderboardRow, ...]

    def __post_init__(self):
        names = [r.model for r in self.rows]
        if len(set(names)) != len(names):
            raise EnsembleError(f"duplicate models in leaderboard: {names}")
        for r in self.rows:
            if not (np.isfinite(r.rmsse) and np.isfinite(r.smql) and np.isfinite(r.ct_seconds)):
                raise EnsembleError(f"non-finite leaderboard metrics for {r.model!r}")

    def __len__(self) -> int:
        return len(self.rows)


def select_pool(board: Leaderboard, criterion: str, k: int) -> EnsembleSpec:
    """Top-k models by RMSSE (accuracy) or CT (time), smallest first.

    Ties break on the other metric, then on model name, so selection is
    deterministic and pools nest: the size-k pool is a prefix of the
    size-(k+1) pool.
    """
    if criterion not in CRITERIA:
        raise EnsembleError(f"criterion must be one of {CRITERIA}, got {criterion!r}")
    if k < 2:
        raise EnsembleError(f"pool size must be >= 2, got {k}")
    if len(board) < k:
        raise EnsembleError(f"leaderboard has {len(board)} models, fewer than k={k}")
    if criterion == "accuracy":
        key = lambda r: (r.rmsse, r.ct_seconds, r.model)
    else:
        key = lambda r: (r.ct_seconds, r.rmsse, r.model)
    ranked = sorted(board.rows, key=key)
    return EnsembleSpec(members=tuple(r.model for r in ranked[:k]), criterion=criterion)


def _check_aligned(members: Sequence[ScenarioResult]) -> None:
    if len(members) < 2:
        raise EnsembleError(f"need at least 2 members to combine, got {len(members)}")
    head = members[0]
    for m in members[1:]:
        if m.series_ids != head.series_ids:
            raise EnsembleError(
                f"misaligned series ids: {m.method} has {m.series_ids[:3]}..., "
                f"{head.method} has {head.series_ids[:3]}..."
            )
        if not np.array_equal(m.origins, head.origins):
            raise EnsembleError(f"misaligned origins between {head.method} and {m.method}")
        if m.horizon != head.horizon:
            raise EnsembleError(
                f"horizon mismatch: {head.method}={head.horizon}, {m.method}={m.horizon}"
            )


def combine_points(members: Sequence[ScenarioResult]) -> np.ndarray:
    """Cell-wise arithmetic mean of aligned member point forecasts."""
    _check_aligned(members)
    return np.mean([m.points for m in members], axis=0)


def combine_quantiles(members: Sequence[ScenarioResult]) -> tuple[np.ndarray, bool]:
    """Cell-wise mean per quantile level; re-sorts levels if any crossing appears.

    The mean of monotone member curves is monotone, so the repair flag
    only trips on numerical noise. Returns (quantiles, repaired).
    """
    _check_aligned(members)
    head = members[0]
    for m in members[1:]:
        if m.levels.levels != head.levels.levels:
            raise EnsembleError(
                f"level sets differ: {head.method}={head.levels.levels}, "
                f"{m.method}={m.levels.levels}"
            )
    combined = np.mean([m.quantiles for m in members], axis=0)
    monotone = bool((np.diff(combined, axis=-1) >= 0).all())
    if not monotone:
        combined = np.sort(combined, axis=-1)
    return combined, not monotone


def combine_results(members: Sequence[ScenarioResult], method: str) -> ScenarioResult:
    """Simple-mean ensemble of aligned member scenarios.

    CT is additive over members (combination cost is excluded); the fit
    count reported is the sum of member fit counts.
    """
    _check_aligned(members)
    head = members[0]
    for m in members[1:]:
        if not np.array_equal(m.actuals, head.actuals):
            raise EnsembleError(f"actuals differ between {head.method} and {m.method}")
    points = combine_points(members)
    quantiles, repaired = combine_quantiles(members)
    ledger = CTLedger(
        fit_seconds=sum(m.ledger.fit_seconds for m in members),
        predict_seconds=sum(m.ledger.predict_seconds for m in members),
        fit_count=sum(m.ledger.fit_count for m in members),
    )
    warn = [f"{m.method}: {w}" for m in members for w in m.warnings]
    if repaired:
        warn.append("quantile crossing repaired after averaging")
    return dataclasses.replace(
        head,
        method=method,
        points=points,
        quantiles=quantiles,
        ledger=ledger,
        warnings=tuple(warn),
    )

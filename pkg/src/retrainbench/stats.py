"""Friedman test with Nemenyi post-hoc critical differences.

Blocks are scored units (series), treatments are retrain scenarios, and
lower metric values rank better (rank 1 = best). The classical chi-square
form of the Friedman statistic is used, with the standard tie
correction; a degenerate all-ties matrix yields statistic 0 and p = 1
rather than an error. Implemented in-package because the scipy variant
rejects k = 2 treatments and the all-ties case.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import chi2, rankdata

VERDICT_BETTER = "better"
VERDICT_INDISTINGUISHABLE = "indistinguishable"
VERDICT_WORSE = "worse"

# Two-tailed Nemenyi critical values q_{alpha,k}: studentized range at
# infinite degrees of freedom divided by sqrt(2), k = 2..20.
NEMENYI_Q = {
    0.05: (
        1.960, 2.344, 2.569, 2.728, 2.850, 2.948, 3.031, 3.102, 3.164,
        3.219, 3.268, 3.313, 3.354, 3.391, 3.426, 3.458, 3.489, 3.517, 3.544,
    ),
    0.10: (
        1.645, 2.052, 2.291, 2.460, 2.589, 2.693, 2.780, 2.855, 2.920,
        2.978, 3.030, 3.077, 3.120, 3.159, 3.196, 3.230, 3.261, 3.291, 3.319,
    ),
}


class StatsError(ValueError):
    """Rank-test contract violation."""


@dataclass(frozen=True)
class RankMatrix:
    """Blocks x treatments metric values with derived per-block ranks."""

    values: np.ndarray
    treatments: tuple
    blocks: tuple = ()

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise StatsError(f"values must be 2-D (blocks x treatments), got shape {v.shape}")
        n, k = v.shape
        if k != len(self.treatments):
            raise StatsError(f"{k} columns but {len(self.treatments)} treatment labels")
        if self.blocks and n != len(self.blocks):
            raise StatsError(f"{n} rows but {len(self.blocks)} block labels")
        if k < 2:
            raise StatsError(f"need at least 2 treatments, got {k}")
        if n < 2:
            raise StatsError(f"need at least 2 blocks, got {n}")
        if not np.isfinite(v).all():
            raise StatsError("rank matrix contains missing or non-finite cells")
        object.__setattr__(self, "values", v)

    def ranks(self) -> np.ndarray:
        """Within-block ranks, 1 = best (smallest value), average ranks for ties."""
        return rankdata(self.values, axis=1)


@dataclass(frozen=True)
class FriedmanResult:
    statistic: float
    pvalue: float
    mean_ranks: np.ndarray
    n_blocks: int

    def rank_of(self, treatments: Sequence, treatment) -> float:
        return float(self.mean_ranks[list(treatments).index(treatment)])


def friedman(matrix: RankMatrix) -> FriedmanResult:
    """Chi-square Friedman statistic with tie correction, df = k - 1."""
    ranks = matrix.ranks()
    n, k = ranks.shape
    rank_sums = ranks.sum(axis=0)
    mean_ranks = rank_sums / n

    tie_sum = 0.0
    for row in matrix.values:
        _, counts = np.unique(row, return_counts=True)
        tie_sum += float((counts**3 - counts).sum())
    correction = 1.0 - tie_sum / (n * k * (k**2 - 1))

    if correction <= 0:
        # Every block fully tied: no evidence of any treatment difference.
        return FriedmanResult(0.0, 1.0, mean_ranks, n)

    stat = (12.0 / (n * k * (k + 1)) * float(rank_sums @ rank_sums) - 3.0 * n * (k + 1))
    stat = max(stat / correction, 0.0)
    pvalue = float(chi2.sf(stat, k - 1))
    return FriedmanResult(stat, pvalue, mean_ranks, n)


def nemenyi_cd(k: int, n_blocks: int, alpha: float = 0.05) -> float:
    """Critical mean-rank difference q_{alpha,k} * sqrt(k(k+1)/(6N))."""
    if k < 2:
        raise StatsError(f"need at least 2 treatments, got k={k}")
    if n_blocks < 2:
        raise StatsError(f"need at least 2 blocks, got N={n_blocks}")
    if alpha not in NEMENYI_Q:
        raise StatsError(f"alpha must be one of {sorted(NEMENYI_Q)}, got {alpha}")
    table = NEMENYI_Q[alpha]
    if k - 2 >= len(table):
        raise StatsError(f"critical values tabulated for k <= {len(table) + 1}, got k={k}")
    q = table[k - 2]
    return q * np.sqrt(k * (k + 1) / (6.0 * n_blocks))


def compare_to_baseline(
    treatments: Sequence,
    mean_ranks: Sequence[float],
    cd: float,
    baseline,
) -> Mapping:
    """Per-treatment verdict against the baseline's mean rank.

    A treatment within the critical difference of the baseline (closed
    boundary) is indistinguishable; otherwise the lower mean rank wins.
    """
    treatments = list(treatments)
    if baseline not in treatments:
        raise StatsError(f"baseline {baseline!r} not among treatments {treatments}")
    base_rank = mean_ranks[treatments.index(baseline)]
    verdicts = {}
    for t, rank in zip(treatments, mean_ranks):
        gap = rank - base_rank
        if abs(gap) <= cd:
            verdicts[t] = VERDICT_INDISTINGUISHABLE
        elif gap < 0:
            verdicts[t] = VERDICT_BETTER
        else:
            verdicts[t] = VERDICT_WORSE
    return verdicts

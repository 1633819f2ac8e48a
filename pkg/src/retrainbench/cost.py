"""Monetary cost projections from computing-time ledgers.

Cost scales linearly with computing time, the hourly rate, and the ratio
of the projected deployment size to the evaluated dataset size, so a
desk-scale run extrapolates to fleet-scale spend. Values stay full
precision here; rounding to two places happens only at report emission.
"""

from __future__ import annotations

from dataclasses import dataclass


class CostError(ValueError):
    """Cost model contract violation."""


@dataclass(frozen=True)
class CostModel:
    """Hourly compute rate plus evaluated and projected series counts."""

    rate_per_hour: float
    dataset_series: int
    target_series: int

    def __post_init__(self):
        if self.rate_per_hour <= 0:
            raise CostError(f"rate_per_hour must be > 0, got {self.rate_per_hour}")
        if self.dataset_series <= 0:
            raise CostError(f"dataset_series must be > 0, got {self.dataset_series}")
        if self.target_series <= 0:
            raise CostError(f"target_series must be > 0, got {self.target_series}")


def estimate_cost(ct_seconds: float, model: CostModel) -> float:
    """ct/3600 * rate, scaled by target_series / dataset_series."""
    if ct_seconds < 0:
        raise CostError(f"ct_seconds must be >= 0, got {ct_seconds}")
    return (ct_seconds / 3600.0) * model.rate_per_hour * (model.target_series / model.dataset_series)

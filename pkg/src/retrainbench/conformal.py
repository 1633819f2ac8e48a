"""Distribution-free quantile intervals around point forecasters.

Calibration holds out the last c*h observations of a training slice,
fits the model on the remainder, and collects per-step absolute
residuals from rolling h-step predictions over the held-out span, pooled
across series. Interval endpoints are the point forecast plus/minus the
conservative empirical quantile of those scores, so quantile curves are
monotone across levels by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from retrainbench.features import FeatureBuilder
from retrainbench.models import ModelSpec, fit, predict
from retrainbench.panel import PanelSlice

#: The default 14 probability levels: 7 symmetric intervals from 50% to 99%.
DEFAULT_LEVELS = (
    0.005, 0.025, 0.050, 0.100, 0.150, 0.200, 0.250,
    0.750, 0.800, 0.850, 0.900, 0.950, 0.975, 0.995,
)

_MIN_SCORES = 30


class ConformalError(ValueError):
    """Conformal calibration contract violation."""


@dataclass(frozen=True)
class QuantileLevels:
    """Strictly increasing probability levels, symmetric about 0.5."""

    levels: tuple[float, ...] = DEFAULT_LEVELS

    def __post_init__(self):
        qs = self.levels
        if not qs:
            raise ConformalError("level set is empty")
        if any(not 0.0 < q < 1.0 for q in qs):
            raise ConformalError(f"levels must lie in (0, 1): {qs}")
        if any(b <= a for a, b in zip(qs, qs[1:])):
            raise ConformalError(f"levels must be strictly increasing: {qs}")
        mirrored = tuple(round(1.0 - q, 12) for q in reversed(qs))
        if tuple(round(q, 12) for q in qs) != mirrored:
            raise ConformalError(
                f"levels must be symmetric about 0.5 (every q paired with 1-q): {qs}"
            )

    def __iter__(self):
        return iter(self.levels)

    def __len__(self):
        return len(self.levels)

    def labels(self) -> tuple[str, ...]:
        return tuple(f"q{q:g}" for q in self.levels)


def empirical_score_quantile(sorted_scores: np.ndarray, level: float) -> float:
    """Conservative order statistic: index ceil((m+1)*level), clipped to m."""
    m = len(sorted_scores)
    if m == 0:
        raise ConformalError("no calibration scores")
    k = min(math.ceil((m + 1) * level), m)
    return float(sorted_scores[k - 1])


@dataclass
class ConformalCalibration:
    """Per-step sorted nonconformity scores from one calibration pass."""

    step_scores: list[np.ndarray]
    calibration_length: int
    low_score_steps: tuple[int, ...] = ()
    warnings: tuple[str, ...] = field(default=())

    @property
    def horizon(self) -> int:
        return len(self.step_scores)

    def score_quantile(self, step: int, level: float) -> float:
        if not 1 <= step <= self.horizon:
            raise ConformalError(f"step {step} outside 1..{self.horizon}")
        return empirical_score_quantile(self.step_scores[step - 1], level)

    def offsets(self, levels: QuantileLevels) -> np.ndarray:
        """Signed per-(step, level) interval offsets around the point forecast."""
        out = np.zeros((self.horizon, len(levels)))
        for li, q in enumerate(levels):
            if q == 0.5:
                continue
            coverage = 1.0 - 2.0 * q if q < 0.5 else 2.0 * q - 1.0
            sign = -1.0 if q < 0.5 else 1.0
            for s in range(1, self.horizon + 1):
                out[s - 1, li] = sign * self.score_quantile(s, coverage)
        return out


def calibrate(
    spec: ModelSpec,
    train_slice: PanelSlice,
    horizon: int,
    multiple: int,
    builder: FeatureBuilder,
) -> ConformalCalibration:
    """Hold out the slice tail, refit, and pool per-step absolute residuals.

    ``multiple`` is the calibration-window length in forecast horizons
    (at least 2): daily setups conventionally use 4, weekly 2.
    """
    if horizon < 1:
        raise ConformalError(f"horizon must be >= 1, got {horizon}")
    if multiple < 2:
        raise ConformalError(f"calibration multiple must be >= 2, got {multiple}")
    cal_len = multiple * horizon
    warm = builder.config.warmup
    needed = warm + cal_len + horizon
    short = [sid for sid in train_slice.ids if train_slice.length(sid) < needed]
    if short:
        raise ConformalError(
            f"insufficient history for calibration (need {needed} observations): "
            f"series {short[:5]}"
        )

    inner = train_slice.shift_ends(-cal_len)
    model = fit(spec, builder.build_training(inner))

    n_origins = cal_len - horizon + 1
    panel = builder.panel
    per_step: list[list[np.ndarray]] = [[] for _ in range(horizon)]
    for j in range(n_origins):
        sl_j = inner.shift_ends(j)
        points, _ = predict(model, sl_j, horizon)
        actual = np.empty_like(points)
        for i, sid in enumerate(sl_j.ids):
            end = sl_j.ends[sid]
            actual[i] = panel.values(sid)[end:end + horizon]
        resid = np.abs(actual - points)
        for s in range(horizon):
            per_step[s].append(resid[:, s])

    step_scores = [np.sort(np.concatenate(chunks)) for chunks in per_step]
    low = tuple(s + 1 for s, sc in enumerate(step_scores) if len(sc) < _MIN_SCORES)
    warn = (
        (f"fewer than {_MIN_SCORES} calibration scores at steps {low}",) if low else ()
    )
    return ConformalCalibration(
        step_scores=step_scores,
        calibration_length=cal_len,
        low_score_steps=low,
        warnings=warn,
    )


def quantile_forecast(
    points: np.ndarray,
    calibration: ConformalCalibration,
    levels: QuantileLevels | Sequence[float],
) -> np.ndarray:
    """Symmetric conformal quantiles around point forecasts.

    ``points`` has shape (n_series, h); the result adds a trailing level
    axis. Paired levels (a/2, 1-a/2) sit at point -/+ the (1-a) score
    quantile for that step; a 0.5 level reproduces the point forecast.
    """
    if not isinstance(levels, QuantileLevels):
        levels = QuantileLevels(tuple(levels))
    points = np.asarray(points, dtype=float)
    if points.ndim != 2:
        raise ConformalError(f"points must be 2-D (series, step), got shape {points.shape}")
    h = points.shape[1]
    if h > calibration.horizon:
        raise ConformalError(
            f"points horizon {h} exceeds calibration horizon {calibration.horizon}"
        )
    offsets = calibration.offsets(levels)[:h]
    return points[:, :, None] + offsets[None, :, :]

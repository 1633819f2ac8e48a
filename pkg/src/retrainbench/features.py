"""Supervised-learning matrices for cross-learned (global) forecasting models.

Features are leakage-free by construction: lag k at time t reads y_{t-k},
rolling and expanding means end at t-1, calendar features derive from the
target row's timestamp, and static attributes repeat per row. The same
builder produces training matrices and the per-step rows used for
recursive multi-step prediction, so the two paths cannot drift apart.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd

from retrainbench.panel import PanelSlice, SeriesPanel

CALENDAR_FEATURES = ("year", "month", "week", "dayofweek")
STATIC_ENCODINGS = ("ordinal", "onehot")


class FeatureError(ValueError):
    """Feature construction contract violation."""


@dataclass(frozen=True)
class FeatureConfig:
    """Feature recipe shared by training and prediction.

    Day-of-week is encoded 0-6 with Monday=0, month 1-12, week as the ISO
    week number. Categorical statics default to ordinal codes over the
    panel-wide sorted vocabulary; one-hot is available via
    ``static_encoding="onehot"``.
    """

    lags: tuple[int, ...] = (1,)
    rolling_windows: tuple[int, ...] = ()
    expanding_mean: bool = False
    calendar: tuple[str, ...] = ()
    static_encoding: str = "ordinal"
    exogenous: tuple[str, ...] = ()

    def __post_init__(self):
        for k in self.lags:
            if not isinstance(k, int) or k < 1:
                raise FeatureError(f"lags must be positive integers, got {k!r}")
        for w in self.rolling_windows:
            if not isinstance(w, int) or w < 1:
                raise FeatureError(f"rolling windows must be positive integers, got {w!r}")
        unknown = [c for c in self.calendar if c not in CALENDAR_FEATURES]
        if unknown:
            raise FeatureError(f"unknown calendar features {unknown}; choose from {CALENDAR_FEATURES}")
        if self.static_encoding not in STATIC_ENCODINGS:
            raise FeatureError(f"static_encoding must be one of {STATIC_ENCODINGS}")

    @property
    def warmup(self) -> int:
        """Rows before this index lack at least one feature and are dropped."""
        need = [0]
        need.extend(self.lags)
        need.extend(self.rolling_windows)
        if self.expanding_mean:
            need.append(1)
        return max(need)

    @classmethod
    def for_frequency(cls, frequency: int, exogenous: tuple[str, ...] = ()) -> "FeatureConfig":
        """Default recipe: lags {1, 2, f, 2f}, rolling window {f}, expanding mean on."""
        lags = tuple(sorted({1, 2, frequency, 2 * frequency}))
        calendar = ("month", "dayofweek") if frequency == 7 else ("month", "week")
        return cls(
            lags=lags,
            rolling_windows=(frequency,),
            expanding_mean=True,
            calendar=calendar,
            exogenous=exogenous,
        )


@dataclass(frozen=True)
class FeatureMatrix:
    """Pooled design matrix: one row per (series, timestamp) with complete features."""

    X: np.ndarray
    y: np.ndarray
    columns: tuple[str, ...]
    series_ids: np.ndarray
    timestamps: np.ndarray
    frequency: int
    config: FeatureConfig
    builder: "FeatureBuilder" = field(repr=False)

    def __len__(self) -> int:
        return len(self.y)


def _calendar_columns(names: Sequence[str], index: pd.DatetimeIndex) -> list[np.ndarray]:
    cols = []
    for name in names:
        if name == "year":
            cols.append(index.year.to_numpy(dtype=float))
        elif name == "month":
            cols.append(index.month.to_numpy(dtype=float))
        elif name == "week":
            cols.append(index.isocalendar().week.to_numpy(dtype=float))
        elif name == "dayofweek":
            cols.append(index.dayofweek.to_numpy(dtype=float))
    return cols


class FeatureBuilder:
    """Turns panel slices into feature matrices and recursive-step rows.

    Encoders (static ordinal codes, one-hot category lists, categorical
    exogenous vocabularies) are derived once from the panel so that
    training and prediction matrices share byte-identical column
    definitions.
    """

    def __init__(self, panel: SeriesPanel, config: FeatureConfig):
        self.panel = panel
        self.config = config
        missing = [c for c in config.exogenous if c not in panel.exog_columns]
        if missing:
            raise FeatureError(f"exogenous columns {missing} not present in panel")

        self._exog_is_numeric = {}
        self._exog_codes: dict[str, dict[str, float]] = {}
        for c in config.exogenous:
            sample = panel.exog(panel.ids[0], c)
            numeric = np.issubdtype(sample.dtype, np.number)
            self._exog_is_numeric[c] = numeric
            if not numeric:
                vocab = sorted({v for sid in panel.ids for v in panel.exog(sid, c)})
                self._exog_codes[c] = {v: float(i) for i, v in enumerate(vocab)}

        self._static_columns = tuple(sorted(panel.static_columns))
        self._static_codes: dict[str, dict[str, float]] = {}
        self._static_categories: dict[str, list[str]] = {}
        for c in self._static_columns:
            vocab = sorted({panel.static(sid, c) for sid in panel.ids})
            self._static_codes[c] = {v: float(i) for i, v in enumerate(vocab)}
            self._static_categories[c] = vocab

        self.columns = self._column_names()
        # Static feature values are constant per series; precompute once.
        self._static_rows = {sid: self._static_row(sid) for sid in panel.ids}

    def _column_names(self) -> tuple[str, ...]:
        cfg = self.config
        names = [f"lag_{k}" for k in sorted(cfg.lags)]
        names += [f"roll_mean_{w}" for w in sorted(cfg.rolling_windows)]
        if cfg.expanding_mean:
            names.append("expanding_mean")
        names += [c for c in CALENDAR_FEATURES if c in cfg.calendar]
        names += [f"exog_{c}" for c in cfg.exogenous]
        if cfg.static_encoding == "ordinal":
            names += [f"static_{c}" for c in self._static_columns]
        else:
            for c in self._static_columns:
                names += [f"static_{c}={v}" for v in self._static_categories[c]]
        return tuple(names)

    def _static_row(self, sid: str) -> np.ndarray:
        out = []
        for c in self._static_columns:
            value = self.panel.static(sid, c)
            if self.config.static_encoding == "ordinal":
                out.append(self._static_codes[c][value])
            else:
                out.extend(1.0 if v == value else 0.0 for v in self._static_categories[c])
        return np.asarray(out, dtype=float)

    def _exog_value(self, sid: str, col: str, positions: np.ndarray) -> np.ndarray:
        raw = self.panel.exog(sid, col)[positions]
        if self._exog_is_numeric[col]:
            return np.asarray(raw, dtype=float)
        codes = self._exog_codes[col]
        return np.asarray([codes[v] for v in raw], dtype=float)

    @property
    def min_history(self) -> int:
        """Observations a slice must expose before recursive prediction can start."""
        return max(self.config.warmup, 1)

    def build_training(self, sl: PanelSlice) -> FeatureMatrix:
        """Pooled training matrix over all series of the slice.

        Rows inside the warm-up window are dropped; remaining rows carry a
        complete feature vector and their target y_t. Output is
        deterministic: identical inputs give byte-identical matrices.
        """
        cfg = self.config
        warm = cfg.warmup
        blocks: list[np.ndarray] = []
        targets: list[np.ndarray] = []
        row_ids: list[np.ndarray] = []
        row_ts: list[np.ndarray] = []
        for sid in sl.ids:
            start, end = sl.range(sid)
            y = self.panel.values(sid)[start:end]
            L = len(y)
            if L <= warm:
                raise FeatureError(
                    f"series {sid!r}: slice length {L} too short for warm-up {warm}"
                )
            idx = np.arange(warm, L)
            csum = np.concatenate(([0.0], np.cumsum(y)))
            cols: list[np.ndarray] = []
            for k in sorted(cfg.lags):
                cols.append(y[idx - k])
            for w in sorted(cfg.rolling_windows):
                cols.append((csum[idx] - csum[idx - w]) / w)
            if cfg.expanding_mean:
                cols.append(csum[idx] / idx)
            ts = self.panel.timestamps(sid)[start + idx]
            if cfg.calendar:
                cols.extend(_calendar_columns(
                    [c for c in CALENDAR_FEATURES if c in cfg.calendar],
                    pd.DatetimeIndex(ts),
                ))
            for c in cfg.exogenous:
                cols.append(self._exog_value(sid, c, start + idx))
            static = self._static_rows[sid]
            if static.size:
                cols.extend(np.full(len(idx), v) for v in static)
            blocks.append(np.column_stack(cols) if cols else np.empty((len(idx), 0)))
            targets.append(y[idx])
            row_ids.append(np.repeat(sid, len(idx)))
            row_ts.append(ts)
        X = np.vstack(blocks)
        return FeatureMatrix(
            X=X,
            y=np.concatenate(targets),
            columns=self.columns,
            series_ids=np.concatenate(row_ids),
            timestamps=np.concatenate(row_ts),
            frequency=self.panel.frequency,
            config=cfg,
            builder=self,
        )

    def new_state(self, sl: PanelSlice, min_tail: int = 0) -> "RecursiveState":
        return RecursiveState(self, sl, min_tail)

    def feature_row_for_horizon(
        self,
        sl: PanelSlice,
        series_id: str,
        step: int,
        prior_predictions: Sequence[float] = (),
    ) -> np.ndarray:
        """Feature vector for forecast step ``step`` of one series.

        Features at origin+step use actuals up to the origin and the
        supplied recursive predictions thereafter. Raises if a lag or
        window would consume a prediction that was not supplied.
        """
        if step < 1:
            raise FeatureError(f"step must be >= 1, got {step}")
        needed = step - 1 if self._needs_recursion(step) else 0
        if len(prior_predictions) < needed:
            raise FeatureError(
                f"step {step} requires {needed} prior predictions, got {len(prior_predictions)}"
            )
        sub = PanelSlice(
            self.panel,
            {series_id: sl.starts[series_id]},
            {series_id: sl.ends[series_id]},
        )
        # PanelSlice.ids comes from the panel; build a restricted state manually.
        state = RecursiveState(self, sub, 0, ids=(series_id,))
        fills = list(prior_predictions[: step - 1])
        while len(fills) < step - 1:
            fills.append(np.nan)
        for value in fills:
            state.advance(np.asarray([value], dtype=float))
        return state.step_features()[0]

    def _needs_recursion(self, step: int) -> bool:
        if step <= 1:
            return False
        cfg = self.config
        if cfg.rolling_windows or cfg.expanding_mean:
            return True
        return any(k < step for k in cfg.lags)


class RecursiveState:
    """Feature state advanced one forecast step at a time, vectorized across series.

    Keeps a rolling tail buffer of the most recent values (actuals, then
    predictions as the horizon advances) plus running sums for the
    expanding mean, so per-step feature assembly is O(series) numpy work.
    """

    def __init__(self, builder: FeatureBuilder, sl: PanelSlice, min_tail: int = 0, ids=None):
        self.builder = builder
        self.sl = sl
        self.ids = tuple(ids) if ids is not None else sl.ids
        cfg = builder.config
        K = max([min_tail, 1, *cfg.lags, *cfg.rolling_windows])
        self.tail_size = K
        tails = []
        sums = []
        counts = []
        last_ts = []
        self._base_ends = []
        for sid in self.ids:
            start, end = sl.range(sid)
            if end - start < K:
                raise FeatureError(
                    f"series {sid!r}: history {end - start} shorter than required tail {K}"
                )
            y = builder.panel.values(sid)[start:end]
            tails.append(y[-K:])
            sums.append(y.sum())
            counts.append(len(y))
            last_ts.append(builder.panel.timestamps(sid)[end - 1])
            self._base_ends.append(end)
        self.tail = np.array(tails, dtype=float)
        self.run_sum = np.array(sums, dtype=float)
        self.run_count = np.array(counts, dtype=float)
        self.last_ts = np.array(last_ts)
        self.step = 0
        self._static_block = (
            np.vstack([builder._static_rows[sid] for sid in self.ids])
            if builder._static_rows[self.ids[0]].size
            else None
        )

    def lag(self, k: int) -> np.ndarray:
        """Value k positions before the next forecast step, per series."""
        if k > self.tail_size:
            raise FeatureError(f"lag {k} exceeds tail buffer {self.tail_size}")
        return self.tail[:, -k].copy()

    def step_features(self) -> np.ndarray:
        """Feature matrix (n_series, n_features) for the next forecast step."""
        cfg = self.builder.config
        s = self.step + 1
        cols: list[np.ndarray] = []
        for k in sorted(cfg.lags):
            cols.append(self.tail[:, -k])
        for w in sorted(cfg.rolling_windows):
            cols.append(self.tail[:, -w:].mean(axis=1))
        if cfg.expanding_mean:
            cols.append(self.run_sum / self.run_count)
        if cfg.calendar:
            ts = pd.DatetimeIndex(self.last_ts + s * self.builder.panel.spacing)
            cols.extend(_calendar_columns(
                [c for c in CALENDAR_FEATURES if c in cfg.calendar], ts
            ))
        for c in cfg.exogenous:
            vals = np.empty(len(self.ids))
            for i, sid in enumerate(self.ids):
                pos = self._base_ends[i] - 1 + s
                if pos >= self.builder.panel.length(sid):
                    raise FeatureError(
                        f"exogenous {c!r} not available at step {s} for series {sid!r}"
                    )
                vals[i] = self.builder._exog_value(sid, c, np.asarray([pos]))[0]
            cols.append(vals)
        if self._static_block is not None:
            cols.extend(self._static_block.T)
        if not cols:
            return np.empty((len(self.ids), 0))
        return np.column_stack(cols)

    def advance(self, predictions: np.ndarray) -> None:
        """Append one step of predictions to the feature state."""
        preds = np.asarray(predictions, dtype=float)
        if preds.shape != (len(self.ids),):
            raise FeatureError(f"expected {len(self.ids)} predictions, got shape {preds.shape}")
        self.tail = np.column_stack([self.tail[:, 1:], preds])
        self.run_sum = self.run_sum + preds
        self.run_count = self.run_count + 1
        self.step += 1

"""Long-format time-series panel ingestion, validation, filtering, and slicing.

A panel is a collection of univariate demand series on a shared regular
calendar spacing, optionally carrying exogenous columns aligned to
timestamps and static per-series attributes. Panels are immutable after
load; slices are read-only views, so both are safe to share across
concurrent scenario runs.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)


class PanelError(ValueError):
    """Input data violates the panel contract."""


@dataclass(frozen=True)
class PanelSchema:
    """Column-name mapping for long-format input tables."""

    id: str = "unique_id"
    timestamp: str = "ds"
    value: str = "y"


@dataclass(frozen=True)
class _Series:
    """One series: values, timestamps, and aligned exogenous arrays."""

    values: np.ndarray
    timestamps: np.ndarray
    exog: Mapping[str, np.ndarray]
    statics: Mapping[str, str]

    def __len__(self) -> int:
        return len(self.values)


class SeriesPanel:
    """Immutable collection of regularly spaced univariate series.

    ``frequency`` is the seasonal period count (7 for daily data with
    weekly seasonality, 52 for weekly data); ``spacing`` is the constant
    timestamp delta shared by every series.
    """

    def __init__(
        self,
        frequency: int,
        spacing: np.timedelta64,
        series: Mapping[str, _Series],
        static_columns: tuple[str, ...] = (),
        exog_columns: tuple[str, ...] = (),
    ):
        if frequency < 1:
            raise PanelError(f"frequency must be >= 1, got {frequency}")
        self.frequency = int(frequency)
        self.spacing = spacing
        self._series = dict(series)
        self.static_columns = static_columns
        self.exog_columns = exog_columns

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(self._series)

    @property
    def n_series(self) -> int:
        return len(self._series)

    def length(self, series_id: str) -> int:
        return len(self._series[series_id])

    def lengths(self) -> dict[str, int]:
        return {sid: len(s) for sid, s in self._series.items()}

    def values(self, series_id: str) -> np.ndarray:
        return self._series[series_id].values

    def timestamps(self, series_id: str) -> np.ndarray:
        return self._series[series_id].timestamps

    def exog(self, series_id: str, column: str) -> np.ndarray:
        return self._series[series_id].exog[column]

    def static(self, series_id: str, column: str) -> str:
        return self._series[series_id].statics[column]

    def tail_ends(self, offset: int) -> dict[str, int]:
        """Per-series end index ``n_i - offset`` (offset counted from the series end)."""
        if offset < 0:
            raise PanelError(f"offset must be >= 0, got {offset}")
        short = [sid for sid, s in self._series.items() if len(s) < offset]
        if short:
            raise PanelError(f"offset {offset} exceeds length of series {short[:5]}")
        return {sid: len(s) - offset for sid, s in self._series.items()}

    def slice(self, ends: Mapping[str, int] | int, length: int | str = "all") -> PanelSlice:
        return slice_panel(self, ends, length)

    def to_frame(self, schema: PanelSchema = PanelSchema()) -> pd.DataFrame:
        """Long-format frame with id/timestamp/value plus exogenous columns."""
        parts = []
        for sid, s in self._series.items():
            part = {
                schema.id: np.repeat(sid, len(s)),
                schema.timestamp: s.timestamps,
                schema.value: s.values,
            }
            for col in self.exog_columns:
                part[col] = s.exog[col]
            parts.append(pd.DataFrame(part))
        return pd.concat(parts, ignore_index=True)

    def static_frame(self, schema: PanelSchema = PanelSchema()) -> pd.DataFrame | None:
        if not self.static_columns:
            return None
        rows = [
            {schema.id: sid, **{c: s.statics[c] for c in self.static_columns}}
            for sid, s in self._series.items()
        ]
        return pd.DataFrame(rows)


@dataclass(frozen=True)
class PanelSlice:
    """Read-only per-series half-open index ranges over a panel."""

    panel: SeriesPanel
    starts: Mapping[str, int]
    ends: Mapping[str, int]

    @property
    def ids(self) -> tuple[str, ...]:
        return self.panel.ids

    def range(self, series_id: str) -> tuple[int, int]:
        return self.starts[series_id], self.ends[series_id]

    def length(self, series_id: str) -> int:
        return self.ends[series_id] - self.starts[series_id]

    def values(self, series_id: str) -> np.ndarray:
        lo, hi = self.range(series_id)
        return self.panel.values(series_id)[lo:hi]

    def timestamps(self, series_id: str) -> np.ndarray:
        lo, hi = self.range(series_id)
        return self.panel.timestamps(series_id)[lo:hi]

    def shift_ends(self, delta: int) -> PanelSlice:
        """New slice with every end index moved by ``delta`` (starts unchanged)."""
        ends = {sid: e + delta for sid, e in self.ends.items()}
        for sid, e in ends.items():
            if e < self.starts[sid] or e > self.panel.length(sid):
                raise PanelError(f"shifted end {e} out of range for series {sid!r}")
        return PanelSlice(self.panel, self.starts, ends)


def slice_panel(
    panel: SeriesPanel, ends: Mapping[str, int] | int, length: int | str = "all"
) -> PanelSlice:
    """Build a PanelSlice from per-series end indices.

    ``ends`` maps series id to an exclusive end index, or is a single int
    applied to every series. ``length`` is a row count or "all" for the
    full history back to each series' first observation (expanding
    windows always use "all").
    """
    if isinstance(ends, int):
        ends = {sid: ends for sid in panel.ids}
    else:
        missing = [sid for sid in panel.ids if sid not in ends]
        if missing:
            raise PanelError(f"ends missing series {missing[:5]}")
        ends = {sid: int(ends[sid]) for sid in panel.ids}
    for sid, e in ends.items():
        if e < 0 or e > panel.length(sid):
            raise PanelError(
                f"end index {e} out of range for series {sid!r} (length {panel.length(sid)})"
            )
    if length == "all":
        starts = {sid: 0 for sid in panel.ids}
    else:
        if not isinstance(length, int) or length < 0:
            raise PanelError(f"length must be a nonnegative int or 'all', got {length!r}")
        starts = {}
        for sid, e in ends.items():
            if length > e:
                raise PanelError(f"length {length} exceeds end index {e} for series {sid!r}")
            starts[sid] = e - length
    return PanelSlice(panel, starts, ends)


def _read_table(source) -> pd.DataFrame:
    if isinstance(source, pd.DataFrame):
        return source.copy()
    # round_trip parsing keeps serialize/load cycles bit-exact.
    return pd.read_csv(source, float_precision="round_trip")


def load_panel(
    source,
    schema: PanelSchema = PanelSchema(),
    frequency: int = 7,
    statics=None,
    exogenous=None,
) -> SeriesPanel:
    """Load and validate a long-format panel.

    ``source`` is a CSV path or a DataFrame with one row per
    (series, timestamp). Extra columns beyond the schema's id/timestamp/
    value become exogenous columns. ``statics`` is an optional table
    keyed by series id holding per-series categorical attributes;
    ``exogenous`` an optional table keyed by (id, timestamp) whose extra
    columns are merged as additional exogenous columns.

    Timestamps must be ISO-8601, strictly increasing per series at a
    constant spacing shared by the whole panel. Duplicate
    (id, timestamp) pairs, gaps, and unparseable values are rejected.
    Numeric exogenous gaps are rejected; categorical exogenous gaps are
    read as the empty category. Negative target values are allowed with
    a warning.
    """
    df = _read_table(source)
    for col in (schema.id, schema.timestamp, schema.value):
        if col not in df.columns:
            raise PanelError(f"missing required column {col!r}")

    sid = df[schema.id].astype(str)
    ts = pd.to_datetime(df[schema.timestamp], errors="coerce")
    bad_ts = np.flatnonzero(ts.isna().to_numpy())
    if bad_ts.size:
        raise PanelError(f"unparseable timestamps at rows {bad_ts[:5].tolist()}")

    vals = pd.to_numeric(df[schema.value], errors="coerce").astype(float)
    bad_val = np.flatnonzero(~np.isfinite(vals.to_numpy()))
    if bad_val.size:
        raise PanelError(f"unparseable or non-finite values at rows {bad_val[:5].tolist()}")
    n_negative = int((vals < 0).sum())
    if n_negative:
        warnings.warn(f"{n_negative} negative values in panel", stacklevel=2)

    exog_cols = tuple(c for c in df.columns if c not in (schema.id, schema.timestamp, schema.value))
    work = pd.DataFrame({"_id": sid, "_ts": ts, "_y": vals})
    for c in exog_cols:
        work[c] = df[c]

    dup = work.duplicated(["_id", "_ts"], keep=False)
    if dup.any():
        keys = work.loc[dup, ["_id", "_ts"]].drop_duplicates().head(5)
        pairs = [(i, str(t.date())) for i, t in keys.itertuples(index=False, name=None)]
        raise PanelError(f"duplicate (id, timestamp) pairs: {pairs}")

    work = work.sort_values(["_id", "_ts"], kind="mergesort").reset_index(drop=True)

    if exogenous is not None:
        ex = _read_table(exogenous)
        for col in (schema.id, schema.timestamp):
            if col not in ex.columns:
                raise PanelError(f"exogenous table missing column {col!r}")
        ex = ex.rename(columns={schema.id: "_id", schema.timestamp: "_ts"})
        ex["_id"] = ex["_id"].astype(str)
        ex["_ts"] = pd.to_datetime(ex["_ts"], errors="coerce")
        extra = tuple(c for c in ex.columns if c not in ("_id", "_ts"))
        before = len(work)
        work = work.merge(ex, on=["_id", "_ts"], how="left", validate="one_to_one")
        if len(work) != before:
            raise PanelError("exogenous table has duplicate (id, timestamp) keys")
        exog_cols = exog_cols + extra

    # Constant spacing, inferred panel-wide from the most common delta.
    diffs = work.groupby("_id")["_ts"].diff().dropna()
    if len(diffs):
        spacing_td = diffs.mode().iloc[0]
        spacing = np.timedelta64(spacing_td.to_timedelta64())
        gap = diffs[diffs != spacing_td]
        if len(gap):
            row = gap.index[0]
            bad_id = work.loc[row, "_id"]
            prev_ts = work.loc[row - 1, "_ts"].date()
            next_ts = work.loc[row, "_ts"].date()
            raise PanelError(
                f"irregular spacing in series {bad_id!r}: gap between {prev_ts} and {next_ts}"
            )
    else:
        spacing = np.timedelta64(1, "D")

    static_map: dict[str, dict[str, str]] = {}
    static_columns: tuple[str, ...] = ()
    if statics is not None:
        st = _read_table(statics)
        if schema.id not in st.columns:
            raise PanelError(f"statics table missing column {schema.id!r}")
        st = st.astype(str).set_index(schema.id)
        if st.index.duplicated().any():
            raise PanelError("statics table has duplicate series ids")
        static_columns = tuple(st.columns)
        static_map = {i: dict(row) for i, row in st.iterrows()}

    numeric_exog = {
        c: pd.api.types.is_numeric_dtype(work[c]) for c in exog_cols
    }
    series: dict[str, _Series] = {}
    for key, grp in work.groupby("_id", sort=True):
        exog = {}
        for c in exog_cols:
            if numeric_exog[c]:
                arr = grp[c].to_numpy(dtype=float)
                if not np.isfinite(arr).all():
                    raise PanelError(f"missing numeric exogenous {c!r} values in series {key!r}")
                exog[c] = arr
            else:
                exog[c] = grp[c].fillna("").astype(str).to_numpy(dtype=object)
        stat: dict[str, str] = {}
        if static_columns:
            if key not in static_map:
                raise PanelError(f"series {key!r} missing from statics table")
            stat = static_map[key]
        series[key] = _Series(
            values=np.ascontiguousarray(grp["_y"].to_numpy(dtype=float)),
            timestamps=grp["_ts"].to_numpy(),
            exog=exog,
            statics=stat,
        )

    panel = SeriesPanel(frequency, spacing, series, static_columns, exog_cols)
    logger.info("loaded panel: %d series, %d rows", panel.n_series, len(work))
    return panel


def filter_min_length(panel: SeriesPanel, min_obs: int) -> SeriesPanel:
    """Keep only series strictly longer than ``min_obs`` observations."""
    if min_obs < 0:
        raise PanelError(f"min_obs must be >= 0, got {min_obs}")
    kept = {sid: panel._series[sid] for sid in panel.ids if panel.length(sid) > min_obs}
    dropped = panel.n_series - len(kept)
    if not kept:
        raise PanelError(f"no series survive filter (min_obs={min_obs})")
    logger.info("length filter min_obs=%d: dropped %d of %d series", min_obs, dropped, panel.n_series)
    return SeriesPanel(panel.frequency, panel.spacing, kept, panel.static_columns, panel.exog_columns)


def write_panel(panel: SeriesPanel, path, schema: PanelSchema = PanelSchema()) -> None:
    """Serialize a panel back to long-format CSV (ISO dates)."""
    frame = panel.to_frame(schema)
    frame[schema.timestamp] = pd.to_datetime(frame[schema.timestamp]).dt.strftime("%Y-%m-%d")
    frame.to_csv(Path(path), index=False)

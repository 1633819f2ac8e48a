import numpy as np
import pandas as pd
import pytest

from retrainbench.panel import (
    PanelError,
    PanelSchema,
    filter_min_length,
    load_panel,
    slice_panel,
    write_panel,
)


def frame(lengths, start="2023-01-02"):
    parts = []
    for i, n in enumerate(lengths):
        dates = pd.date_range(start, periods=n, freq="D")
        parts.append(pd.DataFrame({
            "unique_id": f"s{i}",
            "ds": dates.strftime("%Y-%m-%d"),
            "y": np.linspace(1.0, 2.0, n),
        }))
    return pd.concat(parts, ignore_index=True)


def test_load_well_formed():
    panel = load_panel(frame([30, 30, 30]), frequency=7)
    assert panel.n_series == 3
    assert panel.frequency == 7
    assert panel.spacing == np.timedelta64(1, "D")
    assert panel.length("s0") == 30


def test_load_sorts_rows():
    df = frame([10]).sample(frac=1.0, random_state=1)
    panel = load_panel(df, frequency=7)
    ts = panel.timestamps("s0")
    assert (np.diff(ts) > np.timedelta64(0, "D")).all()


def test_missing_date_rejected_naming_series():
    df = frame([30, 30])
    df = df.drop(df[(df.unique_id == "s1") & (df.ds == "2023-01-10")].index)
    with pytest.raises(PanelError, match="s1"):
        load_panel(df, frequency=7)


def test_duplicate_keys_rejected():
    df = pd.concat([frame([20]), frame([20]).iloc[[5]]], ignore_index=True)
    with pytest.raises(PanelError, match="duplicate"):
        load_panel(df, frequency=7)


def test_unparseable_value_rejected_with_row():
    df = frame([10])
    df["y"] = df["y"].astype(object)
    df.loc[4, "y"] = "oops"
    with pytest.raises(PanelError, match=r"\[4\]"):
        load_panel(df, frequency=7)


def test_unparseable_timestamp_rejected():
    df = frame([10])
    df.loc[3, "ds"] = "not-a-date"
    with pytest.raises(PanelError, match="timestamp"):
        load_panel(df, frequency=7)


def test_negative_values_warn_but_load():
    df = frame([10])
    df.loc[2, "y"] = -1.0
    with pytest.warns(UserWarning, match="negative"):
        panel = load_panel(df, frequency=7)
    assert panel.values("s0")[2] == -1.0


def test_m5_shaped_input_attaches_exogenous():
    df = frame([20]).rename(columns={"unique_id": "id", "ds": "date", "y": "sales"})
    df["event"] = [""] * 10 + ["holiday"] + [""] * 9
    schema = PanelSchema(id="id", timestamp="date", value="sales")
    panel = load_panel(df, schema=schema, frequency=7)
    assert panel.exog_columns == ("event",)
    assert panel.exog("s0", "event")[10] == "holiday"


def test_separate_exogenous_table_merges():
    df = frame([12])
    ex = df[["unique_id", "ds"]].copy()
    ex["price"] = np.arange(12.0)
    panel = load_panel(df, frequency=7, exogenous=ex)
    assert np.array_equal(panel.exog("s0", "price"), np.arange(12.0))


def test_statics_attach_and_missing_id_rejected():
    df = frame([10, 10])
    st = pd.DataFrame({"unique_id": ["s0", "s1"], "store": ["a", "b"]})
    panel = load_panel(df, frequency=7, statics=st)
    assert panel.static("s1", "store") == "b"
    with pytest.raises(PanelError, match="s1"):
        load_panel(df, frequency=7, statics=st.iloc[[0]])


def test_filter_min_length_strictly_greater():
    panel = load_panel(frame([400, 731, 1941]), frequency=7)
    kept = filter_min_length(panel, 730)
    assert kept.n_series == 2
    assert set(kept.ids) == {"s1", "s2"}
    assert np.array_equal(kept.values("s1"), panel.values("s1"))


def test_filter_weekly_threshold_keeps_all():
    df = frame([200, 200, 200])
    panel = load_panel(df, frequency=52)
    assert filter_min_length(panel, 157).n_series == 3


def test_filter_zero_is_identity():
    panel = load_panel(frame([10, 20]), frequency=7)
    assert filter_min_length(panel, 0).ids == panel.ids


def test_filter_idempotent():
    panel = load_panel(frame([400, 731, 1941]), frequency=7)
    once = filter_min_length(panel, 730)
    twice = filter_min_length(once, 730)
    assert once.ids == twice.ids


def test_filter_empty_result_errors():
    panel = load_panel(frame([10]), frequency=7)
    with pytest.raises(PanelError, match="no series survive"):
        filter_min_length(panel, 100)


def test_slice_full_and_split():
    panel = load_panel(frame([10]), frequency=7)
    full = slice_panel(panel, {"s0": 10})
    assert full.length("s0") == 10
    train = slice_panel(panel, {"s0": 10 - 3})
    assert train.length("s0") == 7
    assert np.array_equal(train.values("s0"), panel.values("s0")[:7])


def test_slice_out_of_range():
    panel = load_panel(frame([10]), frequency=7)
    with pytest.raises(PanelError, match="out of range"):
        slice_panel(panel, {"s0": 11})


def test_successive_expanding_slices_append_one_observation():
    panel = load_panel(frame([10]), frequency=7)
    for end in range(1, 10):
        a = slice_panel(panel, {"s0": end}).values("s0")
        b = slice_panel(panel, {"s0": end + 1}).values("s0")
        assert len(b) == len(a) + 1
        assert np.array_equal(b[:-1], a)


def test_slice_fixed_length():
    panel = load_panel(frame([10]), frequency=7)
    sl = slice_panel(panel, {"s0": 8}, length=5)
    assert sl.range("s0") == (3, 8)


def test_tail_ends():
    panel = load_panel(frame([10, 12]), frequency=7)
    ends = panel.tail_ends(4)
    assert ends == {"s0": 6, "s1": 8}


def test_round_trip_via_frames():
    df = frame([15, 20])
    df["promo"] = 0.5
    panel = load_panel(df, frequency=7)
    again = load_panel(panel.to_frame(), frequency=7)
    assert again.ids == panel.ids
    for sid in panel.ids:
        assert np.array_equal(again.values(sid), panel.values(sid))
        assert np.array_equal(again.timestamps(sid), panel.timestamps(sid))
        assert np.array_equal(again.exog(sid, "promo"), panel.exog(sid, "promo"))


def test_round_trip_via_csv(tmp_path):
    panel = load_panel(frame([15, 20]), frequency=7)
    path = tmp_path / "panel.csv"
    write_panel(panel, path)
    again = load_panel(path, frequency=7)
    assert again.ids == panel.ids
    for sid in panel.ids:
        assert np.array_equal(again.values(sid), panel.values(sid))


def test_weekly_spacing_inferred():
    parts = []
    for i in range(2):
        dates = pd.date_range("2022-01-03", periods=20, freq="W-MON")
        parts.append(pd.DataFrame({
            "unique_id": f"w{i}", "ds": dates.strftime("%Y-%m-%d"), "y": np.arange(20.0) + 1,
        }))
    panel = load_panel(pd.concat(parts, ignore_index=True), frequency=52)
    assert panel.spacing == np.timedelta64(7, "D")
    assert panel.frequency == 52

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anomtypes.core import (MIN_ANOMALY_LENGTH, AnomalyInterval, CsvSchema, Subsequence,
                            TimeSeries, anomalies_from_json, anomalies_to_json, interval_iou,
                            load_csv, moving_average, write_csv, write_fill_mask, znormalize)
from anomtypes._validation import SchemaError, SpacingError


def _write(tmp_path, text, name="s.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestLoadCsv:
    def test_minimal(self, tmp_path):
        ts = load_csv(_write(tmp_path, "t,a\n0,1\n300,2\n600,3\n"))
        assert (ts.n, ts.d, ts.sampling_interval) == (3, 1, 300)
        assert ts.series_id == "s"

    def test_missing_cell_interpolated(self, tmp_path):
        ts = load_csv(_write(tmp_path, "t,a\n0,1.0\n300,\n600,3.0\n"))
        assert ts.values[1, 0] == 2.0
        assert ts.fill_mask[:, 0].tolist() == [False, True, False]

    def test_gap_row_inserted(self, tmp_path):
        ts = load_csv(_write(tmp_path, "t,a\n0,0\n300,1\n900,3\n"))
        assert ts.n == 4
        assert ts.values[2, 0] == 2.0
        assert ts.fill_mask[2, 0]

    def test_edges_held(self, tmp_path):
        ts = load_csv(_write(tmp_path, "t,a\n0,\n300,5\n600,\n"))
        assert ts.values[:, 0].tolist() == [5.0, 5.0, 5.0]

    def test_iso_timestamps(self, tmp_path):
        text = "time,x,y\n2020-01-01T00:00:00Z,1,2\n2020-01-01T00:05:00Z,3,4\n"
        ts = load_csv(_write(tmp_path, text))
        assert ts.sampling_interval == 300
        assert ts.channel_names == ("x", "y")

    def test_small_jitter_accepted(self, tmp_path):
        ts = load_csv(_write(tmp_path, "t,a\n0,1\n310,2\n600,3\n900,4\n"))
        assert ts.n == 4

    def test_non_monotonic(self, tmp_path):
        with pytest.raises(SchemaError):
            load_csv(_write(tmp_path, "t,a\n0,1\n600,2\n300,3\n"))

    def test_irregular_spacing(self, tmp_path):
        with pytest.raises(SpacingError):
            load_csv(_write(tmp_path, "t,a\n0,1\n300,2\n600,3\n760,4\n900,5\n1200,6\n"))

    def test_non_numeric(self, tmp_path):
        with pytest.raises(SchemaError):
            load_csv(_write(tmp_path, "t,a\n0,1\n300,abc\n"))

    def test_schema_columns(self, tmp_path):
        p = _write(tmp_path, "a,when,b\n1,0,2\n3,300,4\n")
        ts = load_csv(p, CsvSchema(timestamp="when", channels=["b"], series_id="x"))
        assert ts.values[:, 0].tolist() == [2.0, 4.0]
        assert ts.series_id == "x"
        with pytest.raises(SchemaError):
            load_csv(p, {"channels": ["missing"]})

    def test_round_trip_bit_exact(self, tmp_path, rng):
        ts = TimeSeries.from_array(rng.normal(size=(50, 2)), series_id="r")
        p = tmp_path / "r.csv"
        write_csv(ts, p)
        back = load_csv(p)
        assert np.array_equal(back.values, ts.values)
        assert np.array_equal(back.timestamps, ts.timestamps)

    def test_fill_mask_sidecar(self, tmp_path):
        ts = load_csv(_write(tmp_path, "t,a\n0,1.0\n300,\n600,3.0\n"))
        out = tmp_path / "mask.csv"
        write_fill_mask(ts, out)
        assert out.read_text().splitlines() == ["row,channel", "1,a"]


class TestTimeSeries:
    def test_equidistance_enforced(self):
        with pytest.raises(SpacingError):
            TimeSeries(np.array([0, 300, 700]), np.zeros(3))

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            TimeSeries.from_array(np.array([1.0, np.nan]))

    def test_immutable(self):
        ts = TimeSeries.from_array(np.zeros((3, 2)))
        with pytest.raises(ValueError):
            ts.values[0, 0] = 1.0

    def test_channel_lookup(self):
        ts = TimeSeries.from_array(np.arange(6.0).reshape(3, 2), channel_names=("a", "b"))
        assert ts.channel("b").values[:, 0].tolist() == [1.0, 3.0, 5.0]
        assert ts.channel_index(1) == 1
        with pytest.raises(KeyError):
            ts.channel_index("c")

    @given(st.integers(1, 50), st.integers(1, 4), st.integers(1, 3600))
    def test_spacing_invariant(self, n, d, c):
        ts = TimeSeries.from_array(np.zeros((n, d)), sampling_interval=c)
        diffs = np.diff(ts.timestamps)
        if n > 1:
            assert diffs.min() == diffs.max() == c


class TestIntervals:
    def test_min_length(self):
        with pytest.raises(ValueError):
            AnomalyInterval(0, MIN_ANOMALY_LENGTH - 1, 1.0, "MDI")
        assert len(AnomalyInterval(0, MIN_ANOMALY_LENGTH, 1.0, "MDI")) == 5

    def test_score_finite(self):
        with pytest.raises(ValueError):
            AnomalyInterval(0, 10, math.inf, "MDI")

    def test_detector_enum(self):
        with pytest.raises(ValueError):
            AnomalyInterval(0, 10, 1.0, "LOF")

    def test_iou_examples(self):
        a = AnomalyInterval(10, 20, 1, "MDI")
        assert interval_iou(a, a) == 1.0
        assert interval_iou(AnomalyInterval(0, 10, 1, "MDI"), AnomalyInterval(20, 30, 1, "MDI")) == 0.0
        assert interval_iou(AnomalyInterval(0, 10, 1, "MDI"),
                            AnomalyInterval(5, 15, 1, "MDI")) == pytest.approx(1 / 3)

    @given(st.integers(0, 100), st.integers(5, 50), st.integers(0, 100), st.integers(5, 50))
    def test_iou_symmetric(self, s1, l1, s2, l2):
        a = AnomalyInterval(s1, s1 + l1, 1, "MDI")
        b = AnomalyInterval(s2, s2 + l2, 1, "DAMP")
        assert interval_iou(a, b) == interval_iou(b, a)
        assert (interval_iou(a, b) == 1.0) == ((s1, l1) == (s2, l2))

    def test_json_round_trip(self, tmp_path):
        items = [AnomalyInterval(3, 30, 2.5, "DAMP", channel=1, series_id="x"),
                 AnomalyInterval(0, 9, 0.5, "MDI", series_id="y", source_channels=(0, 2))]
        assert anomalies_from_json(anomalies_to_json(items)) == items
        p = tmp_path / "a.json"
        anomalies_to_json(items, p)
        assert anomalies_from_json(p)[1].source_channels == (0, 2)
        assert anomalies_from_json("[]") == []

    def test_anomaly_id(self):
        a = AnomalyInterval(3, 30, 2.5, "DAMP", channel=1, series_id="x")
        assert a.anomaly_id == "x:1:DAMP:3-30"

    def test_subsequence(self):
        ts = TimeSeries.from_array(np.arange(20.0).reshape(10, 2))
        s = Subsequence(ts, 2, 5, channel=1)
        assert len(s) == 3
        assert s.values.tolist() == [5.0, 7.0, 9.0]
        with pytest.raises(ValueError):
            Subsequence(ts, 5, 5)


class TestVectorHelpers:
    def test_znormalize_examples(self):
        assert np.allclose(znormalize([1, 2, 3]), [-1.2247449, 0, 1.2247449])
        assert znormalize([5, 5, 5]).tolist() == [0, 0, 0]

    @settings(max_examples=50)
    @given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=60))
    def test_znormalize_idempotent(self, xs):
        x = np.array(xs)
        z = znormalize(x)
        if np.std(x) > 1e-6:
            assert np.allclose(znormalize(z), z, atol=1e-12)

    def test_moving_average_examples(self):
        assert moving_average([1, 2, 3, 4, 5], 1).tolist() == [1, 2, 3, 4, 5]
        assert np.allclose(moving_average([0, 0, 10, 0, 0], 5), [10 / 3, 2.5, 2, 2.5, 10 / 3])
        assert moving_average(np.full(7, 4.0), 5).tolist() == [4.0] * 7

    def test_moving_average_window_too_long(self):
        with pytest.raises(ValueError):
            moving_average([1, 2], 3)

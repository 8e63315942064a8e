import numpy as np
import pytest

from anomtypes.core import TimeSeries
from anomtypes.damp import (DAMP, LeftMatrixProfile, damp_detect, extract_damp_anomalies,
                            left_profile_brute, merge_channel_intervals, znorm_distance)
from anomtypes.core import AnomalyInterval


def _profile(values, m=10, t0=0):
    v = np.asarray(values, dtype=float)
    n = v.size
    return LeftMatrixProfile(v, m, t0, np.ones(n, bool), np.zeros(n, bool), np.full(n, np.nan))


class TestZnormDistance:
    def test_identity_and_affine(self, rng):
        a = rng.normal(size=30)
        assert znorm_distance(a, a) == 0
        assert znorm_distance(a, 3 * a + 7) == pytest.approx(0, abs=1e-9)

    def test_antipodal(self):
        assert znorm_distance([0, 1, 0, 1], [1, 0, 1, 0]) == pytest.approx(4.0)

    def test_constant_conventions(self):
        assert znorm_distance([2, 2, 2], [5, 5, 5]) == 0
        b = np.array([1.0, 2.0, 3.0])
        assert znorm_distance([2, 2, 2], b) == pytest.approx(np.sqrt(3))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            znorm_distance([1, 2, 3], [1, 2])


class TestBrute:
    def test_planted_spike(self, rng):
        t = np.arange(1200)
        x = np.sin(2 * np.pi * t / 50) + rng.normal(0, 0.01, t.size)
        x[900] += 3
        prof = left_profile_brute(x, 50, 200)
        assert abs(prof.discord_index - 900) <= 50

    def test_periodic_zero(self):
        t = np.arange(600)
        x = np.sin(2 * np.pi * t / 25)
        prof = left_profile_brute(x, 25, 100)
        assert np.nanmax(prof.values) <= 1e-6

    def test_single_valid_position(self, rng):
        x = rng.normal(size=60)
        prof = left_profile_brute(x, 10, 50)
        assert prof.valid.sum() == 1

    def test_too_short(self, rng):
        with pytest.raises(ValueError):
            left_profile_brute(rng.normal(size=40), 10, 35)


class TestDampDetect:
    @pytest.mark.parametrize("seed", range(8))
    def test_matches_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(300, 1500))
        m = int(rng.choice([8, 16, 32]))
        x = np.cumsum(rng.normal(size=n)) if seed % 2 else rng.normal(size=n)
        t0 = int(rng.integers(m, n // 2))
        d = damp_detect(x, m, t0)
        b = left_profile_brute(x, m, t0)
        assert d.discord_index == b.discord_index
        assert d.discord_value == pytest.approx(b.discord_value, abs=1e-9)

    def test_lookahead_keeps_top1(self, rng):
        t = np.arange(3000)
        x = np.sin(2 * np.pi * t / 100) + rng.normal(0, 0.05, t.size)
        x[2000:2030] = 0
        b = left_profile_brute(x, 64, 500)
        for look in (0, 256, 1024):
            d = damp_detect(x, 64, 500, lookahead=look)
            assert d.discord_index == b.discord_index
            assert d.discord_value == pytest.approx(b.discord_value, abs=1e-9)

    def test_lookahead_zero_is_backward_only(self, rng):
        x = rng.normal(size=800)
        d = damp_detect(x, 16, 100, lookahead=0)
        assert not d.pruned.any()

    def test_pruning_sound(self, rng):
        t = np.arange(2500)
        x = np.sin(2 * np.pi * t / 80) + rng.normal(0, 0.1, t.size)
        x[1800:1840] += 2
        d = damp_detect(x, 32, 400, lookahead=512)
        b = left_profile_brute(x, 32, 400)
        idx = np.flatnonzero(d.pruned)
        assert np.all(b.values[idx] <= d.prune_bound[idx] + 1e-9)
        exact = d.exact & d.valid
        assert np.allclose(d.values[exact], b.values[exact], atol=1e-9)

    def test_day_periodic_planted_day(self, rng):
        day = 288
        t = np.arange(day * 20)
        x = np.sin(2 * np.pi * t / day) + rng.normal(0, 0.02, t.size)
        x[15 * day:16 * day] = np.sin(4 * np.pi * t[:day] / day)
        d = damp_detect(x, day, 10 * day)
        assert 15 * day - day < d.discord_index < 16 * day


class TestExtraction:
    def test_one_dominant_peak(self):
        v = np.ones(400)
        v[200] = 10
        out = extract_damp_anomalies(_profile(v), k=3, threshold=0.99)
        assert [(a.start, a.end) for a in out] == [(200, 210)]

    def test_two_separated_peaks(self):
        v = np.ones(400)
        v[50] = 10
        v[300] = 9
        out = extract_damp_anomalies(_profile(v), k=5, threshold=0.99)
        assert [a.start for a in out] == [50, 300]
        assert out[0].end <= out[1].start

    def test_k1_global_discord(self, rng):
        v = rng.uniform(size=500)
        out = extract_damp_anomalies(_profile(v), k=1, threshold=None)
        assert out[0].start == int(np.argmax(v))

    def test_empty_profile(self):
        assert extract_damp_anomalies(_profile(np.full(50, np.nan)), k=2) == []

    def test_non_overlapping(self, rng):
        v = rng.uniform(size=2000)
        out = extract_damp_anomalies(_profile(v, m=37), threshold=0.5)
        spans = sorted((a.start, a.end) for a in out)
        assert all(e <= s for (_, e), (s, _) in zip(spans, spans[1:]))


class TestEstimator:
    def test_multichannel_and_merge(self, rng):
        t = np.arange(3000)
        X = np.column_stack([np.sin(2 * np.pi * t / 100 + p) for p in (0, 1)])
        X += rng.normal(0, 0.02, X.shape)
        X[2000:2050, 0] += 2
        X[2010:2060, 1] -= 2
        est = DAMP(m=100, t0=500, n_anomalies=1).fit(TimeSeries.from_array(X, series_id="q"))
        assert {a.channel for a in est.anomalies_} == {0, 1}
        merged = est.merged_anomalies()
        assert len(merged) == 1
        assert merged[0].channel is None
        assert merged[0].source_channels == (0, 1)

    def test_get_params(self):
        assert DAMP().get_params() == {"m": 288, "t0": 2880, "lookahead": 0,
                                       "n_anomalies": None, "threshold": 0.98}

    def test_merge_disjoint(self):
        a = [AnomalyInterval(0, 10, 1, "DAMP", channel=0), AnomalyInterval(20, 30, 2, "DAMP", channel=1)]
        assert len(merge_channel_intervals(a)) == 2

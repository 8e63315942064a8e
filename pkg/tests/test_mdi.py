import math

import numpy as np
import pytest

from anomtypes.core import AnomalyInterval, TimeSeries, interval_iou
from anomtypes.mdi import (MDI, GaussianModel, IntervalProposal, auto_embedding_dim,
                           hotellings_scores, kl_gaussian, mdi_scan, propose_intervals,
                           time_delay_embed)


def _g(mean, cov):
    return GaussianModel(np.atleast_1d(np.asarray(mean, float)), np.atleast_2d(np.asarray(cov, float)), 10)


def _planted(seed, n=2000, shift=5.0, start=1200, length=200):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=n)
    x[start:start + length] += shift
    return x, AnomalyInterval(start, start + length, 1, "MDI")


class TestEmbedding:
    def test_identity(self, rng):
        ts = TimeSeries.from_array(rng.normal(size=(20, 2)))
        assert np.array_equal(time_delay_embed(ts, 1, 1).values, ts.values)

    def test_hand_example(self):
        out = time_delay_embed(TimeSeries.from_array(np.array([1., 2, 3, 4])), 1, 3)
        assert out.values.tolist() == [[1, 1, 1], [2, 1, 1], [3, 2, 1], [4, 3, 2]]

    def test_too_short(self):
        with pytest.raises(ValueError):
            time_delay_embed(np.arange(3.0), lag=2, dim=3)

    def test_auto_dim(self, rng):
        assert auto_embedding_dim(rng.normal(size=2000)) == 1
        smooth = np.sin(np.arange(2000) / 50)
        assert auto_embedding_dim(smooth) == 3
        assert auto_embedding_dim(np.ones(30)) == 1


class TestHotelling:
    def test_squared_zscore(self, rng):
        x = rng.normal(size=20000)
        x[0] = 3.0
        assert hotellings_scores(x)[0] == pytest.approx(9.0, rel=0.05)

    def test_constant(self):
        assert np.all(hotellings_scores(np.ones(50)) == 0)

    def test_affine_invariance(self, rng):
        X = rng.normal(size=(500, 2))
        s1 = hotellings_scores(X)
        s2 = hotellings_scores(X * [3.0, 0.2] + [5, -1])
        assert np.allclose(s1, s2, atol=1e-6)


class TestProposals:
    def test_flat_scores(self):
        assert propose_intervals(np.ones(1000), 0.99, 144, 288) == []

    def test_single_spike(self):
        s = np.zeros(2000)
        s[1000:1010] = 50
        props = propose_intervals(s, 0.99, 144, 288)
        assert len(props) == 1
        p = props[0]
        assert p.end - p.start >= 144
        assert abs((p.start + p.end) / 2 - 1005) <= 2

    def test_two_spikes(self):
        s = np.zeros(3000)
        s[1000:1010] = 50
        s[1500:1510] = 50
        props = propose_intervals(s, 0.99, 144, 288)
        assert len(props) == 2
        assert props[0].end <= props[1].start

    def test_long_run_split(self):
        s = np.zeros(5000)
        s[1000:1700] = 10
        props = propose_intervals(s, 0.8, 144, 288)
        assert all(p.end - p.start <= 288 for p in props)
        assert props[0].start <= 1000 and props[-1].end >= 1700

    def test_bad_args(self):
        with pytest.raises(ValueError):
            propose_intervals(np.zeros(10), 1.5, 144, 288)


class TestKL:
    def test_identity(self):
        p = _g([0.3, -1], [[2, 0.5], [0.5, 1]])
        assert kl_gaussian(p, p) == pytest.approx(0, abs=1e-9)

    def test_mean_shift(self):
        assert kl_gaussian(_g(1, 1), _g(0, 1)) == pytest.approx(0.5, abs=1e-12)

    def test_variance_ratio_closed_form(self):
        # KL(N(0,4) || N(0,1)) = (4 - 1 - ln 4) / 2
        assert kl_gaussian(_g(0, 4), _g(0, 1)) == pytest.approx((3 - math.log(4)) / 2, abs=1e-12)

    def test_non_negative(self, rng):
        for _ in range(50):
            A = rng.normal(size=(2, 2))
            B = rng.normal(size=(2, 2))
            p = _g(rng.normal(size=2), A @ A.T + 0.1 * np.eye(2))
            q = _g(rng.normal(size=2), B @ B.T + 0.1 * np.eye(2))
            assert kl_gaussian(p, q) >= -1e-9

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            kl_gaussian(_g(0, 1), _g([0, 0], np.eye(2)))

    def test_model_validation(self):
        with pytest.raises(ValueError):
            GaussianModel(np.zeros(2), np.array([[1, 0.5], [0, 1]]), 3)


class TestScan:
    def test_planted_mean_shift(self):
        x, truth = _planted(0)
        props = propose_intervals(hotellings_scores(x), 0.99, 144, 288)
        top = mdi_scan(x, 144, 288, props, top_k=3)[0]
        assert interval_iou(top, truth) >= 0.5

    def test_proposals_match_full_scan(self):
        x, _ = _planted(1)
        props = propose_intervals(hotellings_scores(x), 0.99, 144, 288)
        a = mdi_scan(x, 144, 288, props, top_k=1)[0]
        b = mdi_scan(x, 144, 288, top_k=1, full_scan=True)[0]
        assert (a.start, a.end) == (b.start, b.end)

    def test_top_k_zero(self):
        x, _ = _planted(2)
        assert mdi_scan(x, 144, 288, [], top_k=0) == []

    def test_ranking_and_suppression(self):
        x, _ = _planted(3)
        out = mdi_scan(x, 144, 288, top_k=10, full_scan=True)
        scores = [a.score for a in out]
        assert scores == sorted(scores, reverse=True)
        for i in range(len(out)):
            for j in range(i + 1, len(out)):
                assert interval_iou(out[i], out[j]) <= 0.5

    def test_affine_location_invariance(self):
        x, _ = _planted(4)
        X = np.column_stack([x, np.roll(x, 7)])
        a = mdi_scan(X, 144, 288, top_k=1, full_scan=True)[0]
        b = mdi_scan(X * [4.0, 0.1] + [2, 9], 144, 288, top_k=1, full_scan=True)[0]
        assert (a.start, a.end) == (b.start, b.end)

    def test_requires_proposals_or_full(self):
        with pytest.raises(ValueError):
            mdi_scan(np.zeros(500), 144, 288)

    def test_unbiased_variant(self):
        x, truth = _planted(5)
        top = mdi_scan(x, 144, 288, top_k=1, full_scan=True, divergence="unbiased")[0]
        assert interval_iou(top, truth) >= 0.5


class TestEstimator:
    def test_fit(self):
        x, truth = _planted(6)
        est = MDI(top_k=2).fit(TimeSeries.from_array(x, series_id="z"), channel=0)
        assert est.anomalies_[0].series_id == "z"
        assert est.anomalies_[0].channel == 0
        assert interval_iou(est.anomalies_[0], truth) >= 0.5

    def test_params(self):
        p = MDI().get_params()
        assert (p["L_min"], p["L_max"], p["proposals"], p["preproc"]) == (144, 288, "hotellings_t", "td")

    def test_dense_mode(self):
        x, truth = _planted(7)
        est = MDI(proposals="dense", preproc=None, top_k=1).fit(x[:, None])
        assert interval_iou(est.anomalies_[0], truth) >= 0.5

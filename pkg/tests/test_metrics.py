import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import silhouette_score

from anomtypes.cluster import ClusteringResult
from anomtypes.core import AnomalyInterval
from anomtypes.metrics import (MetricsReport, complementarity_stats, consensus_matrix, gini,
                               saai, saai_from_counts, silhouette, synchronized_pairs)

from conftest import make_anomaly

SAAI_VECTORS = [
    # k, n_singletons, n_same_cluster, n_pairs, expected
    (3, 0, 3, 3, 5 / 6),
    (5, 2, 3, 3, 0.7),
    (4, 0, 1, 3, 13 / 24),
    (2, 1, 3, 3, 0.5),
    (7, 6, 0, 3, 0.0),
]


def _clustering(labels, ids=None, fs=None):
    labels = np.asarray(labels)
    ids = ids or tuple(f"x{i}" for i in range(labels.size))
    return ClusteringResult(labels, int(labels.max()) + 1, "KMeans", "Euclidean",
                            anomaly_ids=ids, feature_set=fs)


class TestSaai:
    @pytest.mark.parametrize("k,n1,same,pairs,expected", SAAI_VECTORS)
    def test_gold_vectors(self, k, n1, same, pairs, expected):
        assert saai_from_counts(k, n1, same, pairs) == pytest.approx(expected, abs=1e-9)

    def test_from_anomalies(self):
        # three events seen on channels 0, 1, 2; each event its own cluster
        anoms, labels = [], []
        for e, start in enumerate((0, 100, 200)):
            for c in range(3):
                anoms.append(make_anomaly(start, start + 20, channel=c))
                labels.append(e)
        res = saai(anoms, labels)
        assert res.n_pairs == 9 and res.n_same_cluster == 9
        assert res.k == 3 and res.n_singletons == 0
        assert res.value == pytest.approx(1 - 0.5 / 3)

    def test_same_channel_pairs_ignored(self):
        anoms = [make_anomaly(0, 20, channel=0), make_anomaly(0, 20, channel=0)]
        assert synchronized_pairs(anoms) == []
        res = saai(anoms, [0, 1])
        assert res.value is None and not res.defined
        assert res.to_dict()["value"] == "undefined"

    def test_iou_threshold_strict(self):
        a = make_anomaly(0, 10, channel=0)
        b = make_anomaly(7, 17, channel=1)
        # IoU = 3 / 17
        assert synchronized_pairs([a, b], 3 / 17) == []
        assert synchronized_pairs([a, b], 0.17) == [(0, 1)]

    def test_lambda_validation(self):
        with pytest.raises(ValueError):
            saai_from_counts(3, 0, 1, 1, 0.6, 0.6)
        with pytest.raises(ValueError):
            saai([make_anomaly(0, 5)], [0, 1])

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 30).flatmap(lambda k: st.tuples(
        st.just(k), st.integers(0, k), st.integers(1, 50))).flatmap(lambda t: st.tuples(
            st.just(t[0]), st.just(t[1]), st.integers(0, t[2]), st.just(t[2]))))
    def test_bounds_and_monotone(self, args):
        k, n1, same, pairs = args
        v = saai_from_counts(k, n1, same, pairs)
        if n1 < k:
            assert -1e-12 <= v <= 1 + 1e-12
        else:
            # all clusters singletons: nothing co-clustered, floor is -lambda2 / k
            assert same == 0 or v <= 0.5
            assert saai_from_counts(k, n1, 0, pairs) == pytest.approx(-0.5 / k)
        if same < pairs:
            assert saai_from_counts(k, n1, same + 1, pairs) >= v
        if n1 < k:
            assert saai_from_counts(k, n1 + 1, same, pairs) < v


class TestSilhouette:
    def test_hand_case(self):
        X = np.array([[0.0], [1.0], [10.0]])
        res = silhouette(X, [0, 0, 1])
        expected = ((10 - 1) / 10 + (9 - 1) / 9 + 0) / 3
        assert res.global_score == pytest.approx(expected, abs=1e-12)
        assert res.samples[2] == 0.0

    def test_perfect_separation(self):
        X = np.array([[0.0], [0.0], [100.0], [100.0]])
        assert silhouette(X, [0, 0, 1, 1]).global_score == 1.0

    def test_identical_points(self):
        assert silhouette(np.zeros((4, 2)), [0, 0, 1, 1]).global_score == 0.0

    def test_matches_sklearn(self, rng):
        X = rng.normal(size=(40, 3))
        labels = rng.integers(0, 4, 40)
        assert silhouette(X, labels).global_score == pytest.approx(
            silhouette_score(X, labels), abs=1e-12)

    def test_relabel_invariant(self, rng):
        X = rng.normal(size=(30, 2))
        labels = rng.integers(0, 3, 30)
        a = silhouette(X, labels)
        b = silhouette(X, (labels + 1) % 3)
        assert a.global_score == pytest.approx(b.global_score, abs=1e-12)

    def test_single_cluster(self):
        with pytest.raises(ValueError):
            silhouette(np.zeros((3, 1)), [0, 0, 0])

    def test_precomputed(self, rng):
        X = rng.normal(size=(10, 2))
        D = np.linalg.norm(X[:, None] - X[None], axis=2)
        lab = [0] * 5 + [1] * 5
        assert silhouette(None, lab, distances=D).global_score == pytest.approx(
            silhouette(X, lab).global_score)


class TestGini:
    def test_examples(self):
        assert gini([5, 5, 5, 5]) == 0.0
        assert gini([1, 0, 0, 0, 0]) == pytest.approx(0.8)
        assert gini([0, 1]) == pytest.approx(0.5)

    def test_errors(self):
        for bad in ([], [0, 0], [1, -1]):
            with pytest.raises(ValueError):
                gini(bad)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.integers(0, 100), min_size=1, max_size=25).filter(any),
           st.floats(0.1, 50))
    def test_scale_invariant_and_bounded(self, sizes, c):
        g = gini(sizes)
        assert 0 <= g <= 1 - 1 / len(sizes) + 1e-12
        assert gini(np.array(sizes) * c) == pytest.approx(g, abs=1e-12)


class TestConsensus:
    def test_identity(self):
        a = _clustering([0, 0, 1, 2, 2, 1])
        M = consensus_matrix(a, a)
        assert np.array_equal(M.values, np.eye(3))
        assert M.matched == ((0, 0), (1, 1), (2, 2))

    def test_shared_cluster(self):
        a = _clustering([0] * 10 + [1, 1, 2, 2, 3, 3])
        b = _clustering([0] * 10 + [1, 2, 3, 1, 2, 3])
        M = consensus_matrix(a, b)
        assert M.values[0, 0] == 1.0
        assert np.all(M.values[0, 1:] < 0.5) and np.all(M.values[1:, 0] < 0.5)
        assert (0, 0) in M.matched

    def test_split(self):
        a = _clustering([0] * 5 + [1] * 5)
        b = _clustering([0] * 10)
        M = consensus_matrix(a, b)
        assert M.values[:, 0].tolist() == [0.5, 0.5]
        assert M.matched == ((0, 0), (1, 0))

    def test_order_independent(self):
        a = _clustering([0, 0, 1, 1], ids=("p", "q", "r", "s"))
        b = _clustering([1, 1, 0, 0], ids=("s", "r", "q", "p"))
        assert np.array_equal(consensus_matrix(a, b).values, np.eye(2))

    def test_mismatched(self):
        with pytest.raises(ValueError):
            consensus_matrix(_clustering([0, 1]), _clustering([0, 1], ids=("x0", "zz")))

    def test_serialization(self):
        a = _clustering([0, 1], fs="Crafted")
        d = consensus_matrix(a, a).to_dict()
        assert d["pair"] == ["Crafted", "Crafted"] and d["matched"] == [[0, 0], [1, 1]]


class TestComplementarity:
    def test_disjoint(self):
        a = [make_anomaly(100 * i, 100 * i + 10, detector="MDI") for i in range(3)]
        b = [make_anomaly(1000 + 100 * i, 1000 + 100 * i + 10) for i in range(7)]
        s = complementarity_stats(a, b)
        assert s["count"] == {"a_only": 3, "b_only": 7, "joint": 0}
        assert s["count_pct"] == {"a_only": 30.0, "b_only": 70.0, "joint": 0.0}

    def test_identical(self):
        a = [make_anomaly(100 * i, 100 * i + 10) for i in range(4)]
        s = complementarity_stats(a, a)
        assert s["count_pct"]["joint"] == 100.0 and s["length_pct"]["joint"] == 100.0

    def test_half_overlap(self):
        s = complementarity_stats([make_anomaly(0, 20)], [make_anomaly(10, 30)])
        assert s["length"] == {"a_only": 10, "b_only": 10, "joint": 10}
        assert s["count"] == {"a_only": 0, "b_only": 0, "joint": 1}

    def test_channels_separate(self):
        s = complementarity_stats([make_anomaly(0, 20, channel=0)],
                                  [make_anomaly(0, 20, channel=1)])
        assert s["count"]["joint"] == 0 and s["length"]["joint"] == 0


def test_report_json():
    rep = MetricsReport(ssc=silhouette(np.array([[0.0], [1], [10]]), [0, 0, 1]), gini=0.25)
    d = json.loads(rep.to_json())
    assert d["saai"]["value"] == "undefined" and d["gini"] == 0.25
    assert len(d["ssc"]["per_cluster"]) == 2

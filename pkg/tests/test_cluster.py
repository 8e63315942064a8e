import numpy as np
import pytest
from scipy.cluster.hierarchy import linkage
from sklearn.base import clone
from sklearn.metrics import adjusted_rand_score

from anomtypes.cluster import (CentroidHAC, ClusteringResult, KMeansPP, canonical_labels, dba,
                               dtw_distance, dtw_pairwise, dtw_path, hac_centroid, kmeans_pp)
from anomtypes.features import FeatureMatrix


def _blobs(rng, n=20, sep=10.0):
    X = np.vstack([rng.normal(0, 1, (n, 2)), rng.normal(sep, 1, (n, 2))])
    y = np.repeat([0, 1], n)
    return X, y


def _fm(X):
    return FeatureMatrix(tuple(f"a{i}" for i in range(len(X))), "Crafted", "Euclidean",
                         columns=tuple(f"c{j}" for j in range(X.shape[1])), data=X)


class TestDTW:
    def test_hand_cases(self):
        assert dtw_distance([0, 0, 0], [1, 1, 1]) == pytest.approx(np.sqrt(3), abs=1e-12)
        assert dtw_distance([1, 2, 3], [1, 1, 2, 3]) == 0.0
        x = np.random.default_rng(0).normal(size=25)
        assert dtw_distance(x, x) == 0.0

    def test_symmetric(self, rng):
        a, b = rng.normal(size=17), rng.normal(size=30)
        assert dtw_distance(a, b) == pytest.approx(dtw_distance(b, a), rel=1e-12)

    def test_never_exceeds_euclidean(self, rng):
        a, b = rng.normal(size=20), rng.normal(size=20)
        assert dtw_distance(a, b) <= np.linalg.norm(a - b) + 1e-12

    def test_band_zero_is_euclidean(self, rng):
        a, b = rng.normal(size=20), rng.normal(size=20)
        assert dtw_distance(a, b, band=0) == pytest.approx(np.linalg.norm(a - b), rel=1e-12)

    def test_multichannel(self, rng):
        a = rng.normal(size=(12, 3))
        assert dtw_distance(a, a) == 0.0
        with pytest.raises(ValueError):
            dtw_distance(a, rng.normal(size=(12, 2)))

    def test_path_endpoints(self, rng):
        a, b = rng.normal(size=8), rng.normal(size=11)
        path, dist = dtw_path(a, b)
        assert dist == pytest.approx(dtw_distance(a, b))
        assert tuple(path[0]) == (0, 0) and tuple(path[-1]) == (7, 10)

    def test_pairwise(self, rng):
        seqs = [rng.normal(size=int(k)) for k in rng.integers(5, 20, size=6)]
        D = dtw_pairwise(seqs)
        assert np.allclose(D, D.T) and np.all(np.diag(D) == 0)
        assert D[1, 4] == pytest.approx(dtw_distance(seqs[1], seqs[4]))

    def test_dba_does_not_worsen(self, rng):
        seqs = [np.sin(np.linspace(0, 6, int(k))) + 0.1 * rng.normal(size=int(k))
                for k in rng.integers(20, 40, size=8)]
        _, c0 = dba(seqs, seqs[0], max_iter=0)
        _, c1 = dba(seqs, seqs[0], max_iter=10)
        assert c1 <= c0


class TestKMeans:
    def test_two_blobs(self, rng):
        X, y = _blobs(rng)
        res = kmeans_pp(_fm(X), 2, seed=1)
        assert adjusted_rand_score(y, res.assignments) == 1.0

    def test_k_equals_rows(self, rng):
        X = rng.normal(size=(7, 3))
        est = KMeansPP(7, seed=0).fit(X)
        assert est.inertia_ == 0.0
        assert np.unique(est.labels_).size == 7

    def test_deterministic(self, rng):
        X = rng.normal(size=(60, 4))
        a = kmeans_pp(_fm(X), 5, seed=3)
        b = kmeans_pp(_fm(X), 5, seed=3)
        assert np.array_equal(a.assignments, b.assignments)
        assert a.inertia_trace == b.inertia_trace

    @pytest.mark.parametrize("seed", range(8))
    def test_trace_non_increasing(self, seed):
        X = np.random.default_rng(seed).normal(size=(80, 3))
        trace = np.array(kmeans_pp(_fm(X), 6, seed=seed).inertia_trace)
        assert np.all(np.diff(trace) <= 1e-9 * trace[0])

    def test_dtw_trace_non_increasing(self, rng):
        seqs = [rng.normal(size=int(k)) for k in rng.integers(10, 30, size=15)]
        fm = FeatureMatrix(tuple(map(str, range(15))), "Denoised", "DTW", sequences=seqs)
        res = kmeans_pp(fm, 3, seed=0)
        assert np.all(np.diff(res.inertia_trace) <= 1e-9)
        assert res.metric == "DTW"

    def test_permutation_with_mapped_init(self, rng):
        X, _ = _blobs(rng, 15, sep=4.0)
        X = np.vstack([X, rng.normal(2, 1, (10, 2))])
        init = [0, 20, 35]
        base = KMeansPP(3, init=init).fit(X).labels_
        perm = rng.permutation(len(X))
        inv = np.argsort(perm)
        moved = KMeansPP(3, init=[int(inv[i]) for i in init]).fit(X[perm]).labels_
        assert adjusted_rand_score(base[perm], moved) == 1.0

    def test_k_too_large(self, rng):
        with pytest.raises(ValueError):
            kmeans_pp(_fm(rng.normal(size=(3, 2))), 4)

    def test_sklearn_api(self):
        est = KMeansPP(3, seed=9)
        assert clone(est).get_params() == est.get_params()


class TestHAC:
    def test_thin_rectangle(self):
        X = np.array([[0, 0], [10, 0], [0, 1], [10, 1.0]])
        res = hac_centroid(_fm(X), 2)
        assert res.assignments[0] == res.assignments[2]
        assert res.assignments[1] == res.assignments[3]
        assert res.assignments[0] != res.assignments[1]

    def test_k_equals_rows(self, rng):
        X = rng.normal(size=(6, 2))
        assert np.unique(CentroidHAC(6).fit(X).labels_).size == 6

    def test_two_blobs(self, rng):
        X, y = _blobs(rng)
        assert adjusted_rand_score(y, hac_centroid(_fm(X), 2).assignments) == 1.0

    def test_matches_reference_merge_heights(self, rng):
        X = rng.normal(size=(25, 3))
        est = CentroidHAC(2).fit(X)
        Z = linkage(X, method="centroid")
        ours = np.sqrt([d for _, _, d in est.merges_])
        assert np.allclose(ours, Z[:, 2], rtol=1e-9)

    @pytest.mark.parametrize("K", [2, 3, 5, 9])
    def test_exactly_k(self, rng, K):
        X = rng.normal(size=(30, 2))
        est = CentroidHAC(2).fit(X)
        assert np.unique(est.cut(K)).size == K
        assert np.unique(hac_centroid(_fm(X), K).assignments).size == K

    def test_dendrogram_reuse(self, rng):
        X = rng.normal(size=(20, 2))
        model = CentroidHAC(2).fit(_fm(X))
        for K in (2, 4, 7):
            a = hac_centroid(_fm(X), K, model=model).assignments
            assert np.array_equal(a, hac_centroid(_fm(X), K).assignments)

    def test_permutation_invariant(self, rng):
        X = rng.normal(size=(18, 2))
        perm = rng.permutation(18)
        a = CentroidHAC(4).fit(X).labels_
        b = CentroidHAC(4).fit(X[perm]).labels_
        assert adjusted_rand_score(a[perm], b) == 1.0

    def test_dtw_space(self, rng):
        seqs = [np.sin(np.linspace(0, 6, 30)) + 0.05 * rng.normal(size=30) for _ in range(5)]
        seqs += [np.sign(np.linspace(-1, 1, 30)) * 3 + 0.05 * rng.normal(size=30)
                 for _ in range(5)]
        fm = FeatureMatrix(tuple(map(str, range(10))), "Denoised", "DTW", sequences=seqs)
        res = hac_centroid(fm, 2)
        assert adjusted_rand_score(np.repeat([0, 1], 5), res.assignments) == 1.0

    def test_k_too_large(self, rng):
        with pytest.raises(ValueError):
            hac_centroid(_fm(rng.normal(size=(3, 2))), 4)


class TestResult:
    def test_canonical_labels(self):
        assert canonical_labels([5, 5, 2, 9, 2]).tolist() == [0, 0, 1, 2, 1]

    def test_validation(self):
        with pytest.raises(ValueError):
            ClusteringResult(np.array([0, 0, 2]), 3, "KMeans", "Euclidean")
        with pytest.raises(ValueError):
            ClusteringResult(np.array([0, 1]), 2, "DBSCAN", "Euclidean")

    def test_round_trip(self, tmp_path, rng):
        X, _ = _blobs(rng, 5)
        res = kmeans_pp(_fm(X), 3, seed=4)
        path, meta = res.save(tmp_path / "KMeans_K03.csv")
        back = ClusteringResult.load(path)
        assert np.array_equal(back.assignments, res.assignments)
        assert back.anomaly_ids == res.anomaly_ids
        assert back.inertia_trace == res.inertia_trace
        assert back.seed == 4 and back.K == 3

"""Agglomerative clustering with centroid (UPGMC) linkage."""

import logging

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from .._validation import check_scalar_int
from ..features.base import FeatureMatrix
from .dtw import dba, dtw_to_many
from .kmeans import _space
from .result import ClusteringResult, canonical_labels

__all__ = ["CentroidHAC", "centroid_dendrogram", "cut_dendrogram", "hac_centroid"]

logger = logging.getLogger(__name__)


def centroid_dendrogram(space):
    """Full merge sequence for centroid linkage.

    At every step the two active clusters whose centroids have the smallest
    squared distance merge; ties go to the lexicographically smallest slot
    pair. The merged cluster occupies the lower slot and its centroid is the
    size-weighted mean (a DBA barycenter in DTW space).

    Returns
    -------
    merges : list of (slot_a, slot_b, squared_distance)
    """
    n = space.n
    D = np.full((n, n), np.inf)
    centers = [space.point(i) for i in range(n)]
    sizes = np.ones(n, dtype=np.int64)
    members = [[i] for i in range(n)]
    for i in range(n - 1):
        D[i, i + 1:] = space.cost_to(centers[i])[i + 1:]
    merges = []
    active = np.ones(n, dtype=bool)
    for _ in range(n - 1):
        flat = int(np.argmin(D))
        a, b = divmod(flat, n)
        dist = float(D[a, b])
        merges.append((a, b, dist))
        members[a] = members[a] + members[b]
        members[b] = []
        centers[a] = _merged_center(space, centers, sizes, members[a], a, b)
        sizes[a] += sizes[b]
        active[b] = False
        D[b, :] = np.inf
        D[:, b] = np.inf
        others = [o for o in np.flatnonzero(active) if o != a]
        if others:
            row = _center_costs(space, centers[a], [centers[o] for o in others])
            for o, v in zip(others, row):
                lo, hi = (o, a) if o < a else (a, o)
                D[lo, hi] = v
    return merges


def _merged_center(space, centers, sizes, idx, a, b):
    if space.name == "Euclidean":
        return (sizes[a] * centers[a] + sizes[b] * centers[b]) / (sizes[a] + sizes[b])
    init = centers[a] if sizes[a] >= sizes[b] else centers[b]
    avg, _ = dba([space.seqs[i] for i in idx], init, space.dba_iter, space.band)
    return avg


def _center_costs(space, center, others):
    if space.name == "Euclidean":
        diff = np.asarray(others) - center
        return np.einsum("ij,ij->i", diff, diff)
    return dtw_to_many(center, others, space.band)


def cut_dendrogram(n, merges, K):
    """Flat labels after applying the first ``n - K`` merges."""
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b, _ in merges[: n - K]:
        ra, rb = find(a), find(b)
        parent[max(ra, rb)] = min(ra, rb)
    return canonical_labels([find(i) for i in range(n)])


class CentroidHAC(BaseEstimator, ClusterMixin):
    """Centroid-linkage agglomerative clustering cut into exactly K clusters.

    Parameters
    ----------
    n_clusters : int, default=2
    metric : {'euclidean', 'dtw'}, default='euclidean'
    dba_iter : int, default=10
    band : int or None, default=None

    Attributes
    ----------
    labels_ : ndarray of int
    merges_ : list of (int, int, float)
        Slot pair and squared centroid distance of every merge; distances
        may decrease along the sequence (centroid linkage inversions).
    """

    def __init__(self, n_clusters=2, metric="euclidean", dba_iter=10, band=None):
        self.n_clusters = n_clusters
        self.metric = metric
        self.dba_iter = dba_iter
        self.band = band

    def fit(self, X, y=None):
        space = _space(X, self.metric, self.band, self.dba_iter)
        K = check_scalar_int(self.n_clusters, "n_clusters", min_val=1)
        if K > space.n:
            raise ValueError(f"K={K} exceeds the number of rows ({space.n})")
        self.metric_ = space.name
        self.merges_ = centroid_dendrogram(space)
        self.labels_ = cut_dendrogram(space.n, self.merges_, K)
        return self

    def cut(self, K):
        """Labels for another K from the already computed dendrogram."""
        n = len(self.merges_) + 1
        K = check_scalar_int(K, "K", min_val=1, max_val=n)
        return cut_dendrogram(n, self.merges_, K)


def _result(features, K, labels, merges, metric):
    n = len(labels)
    return ClusteringResult(
        assignments=labels, K=K, algorithm="HAC", metric=metric, seed=None,
        anomaly_ids=features.anomaly_ids if isinstance(features, FeatureMatrix) else (),
        n_iter=n - K, merge_distances=tuple(d for _, _, d in merges[: n - K]),
        feature_set=getattr(features, "feature_set", None),
    )


def hac_centroid(features, K, *, band=None, dba_iter=10, model=None):
    """Cluster a FeatureMatrix by centroid linkage into K flat clusters.

    Pass a fitted `model` to reuse its dendrogram across several K.
    """
    K = check_scalar_int(K, "K", min_val=2)
    if model is None:
        model = CentroidHAC(K, "euclidean", dba_iter, band).fit(features)
        labels = model.labels_
    else:
        labels = model.cut(K)
    return _result(features, K, labels, model.merges_, model.metric_)

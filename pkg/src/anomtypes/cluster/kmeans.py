"""K-Means with K-Means++ seeding, in Euclidean or DTW space."""

import logging

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from .._validation import check_2d, check_scalar_int
from ..features.base import FeatureMatrix
from .dtw import _as_2d, _stack, dba, dtw_to_many
from .result import ClusteringResult, canonical_labels

__all__ = ["KMeansPP", "kmeans_pp"]

logger = logging.getLogger(__name__)


class _Euclidean:
    name = "Euclidean"

    def __init__(self, X):
        self.X = check_2d(X, "features")
        self.n = self.X.shape[0]

    def point(self, i):
        return self.X[i].copy()

    def cost_to(self, center):
        diff = self.X - center
        return np.einsum("ij,ij->i", diff, diff)

    def costs(self, centers):
        return np.column_stack([self.cost_to(c) for c in centers])

    def update(self, idx, old):
        return self.X[idx].mean(axis=0)


class _DTW:
    name = "DTW"

    def __init__(self, seqs, band=None, dba_iter=10):
        self.seqs = [_as_2d(s, "sequence") for s in seqs]
        self.stacked = _stack(self.seqs)
        self.n = len(self.seqs)
        self.band = band
        self.dba_iter = dba_iter

    def point(self, i):
        return self.seqs[i].copy()

    def cost_to(self, center):
        return dtw_to_many(center, self.stacked, self.band)

    def costs(self, centers):
        return np.column_stack([self.cost_to(c) for c in centers])

    def update(self, idx, old):
        avg, _ = dba([self.seqs[i] for i in idx], old, self.dba_iter, self.band)
        return avg


def _space(X, metric, band=None, dba_iter=10):
    if isinstance(X, FeatureMatrix):
        metric = X.metric
        X = X.rows()
    metric = {"dtw": "DTW", "euclidean": "Euclidean"}.get(str(metric).lower(), metric)
    if metric == "DTW":
        return _DTW(X, band, dba_iter)
    if metric == "Euclidean":
        return _Euclidean(X)
    raise ValueError(f"unknown metric {metric!r}")


def _plusplus(space, K, rng):
    n = space.n
    chosen = [int(rng.integers(n))]
    closest = space.cost_to(space.point(chosen[0]))
    for _ in range(1, K):
        total = closest.sum()
        if total > 0:
            probs = closest / total
            nxt = int(rng.choice(n, p=probs))
        else:
            # every remaining point duplicates a chosen one
            nxt = next(i for i in range(n) if i not in chosen)
        chosen.append(nxt)
        closest = np.minimum(closest, space.cost_to(space.point(nxt)))
    return chosen


def _repair_empty(space, labels, centers, point_cost, K):
    """Give each empty cluster the point farthest from its own centroid."""
    for c in range(K):
        if np.any(labels == c):
            continue
        sizes = np.bincount(labels, minlength=K)
        movable = sizes[labels] > 1
        cand = np.where(movable, point_cost, -np.inf)
        far = int(np.argmax(cand))
        logger.debug("re-seeding empty cluster %d with point %d", c, far)
        labels[far] = c
        centers[c] = space.point(far)
        point_cost[far] = 0.0
    return labels


def _lloyd(space, K, seed, max_iter, tol, init=None):
    n = space.n
    K = check_scalar_int(K, "K", min_val=1)
    if K > n:
        raise ValueError(f"K={K} exceeds the number of rows ({n})")
    rng = np.random.default_rng(seed)
    if init is None:
        init = _plusplus(space, K, rng)
    init = [int(i) for i in init]
    if len(init) != K:
        raise ValueError("init must list exactly K row indices")
    centers = [space.point(i) for i in init]
    C = space.costs(centers)
    labels = np.argmin(C, axis=1)
    point_cost = C[np.arange(n), labels]
    trace = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        labels = _repair_empty(space, labels, centers, point_cost, K)
        centers = [space.update(np.flatnonzero(labels == c), centers[c]) for c in range(K)]
        C = space.costs(centers)
        new_labels = np.argmin(C, axis=1)
        point_cost = C[np.arange(n), new_labels]
        inertia = float(point_cost.sum())
        trace.append(inertia)
        fixpoint = np.array_equal(new_labels, labels)
        small = len(trace) > 1 and (trace[-2] - inertia) <= tol * trace[-2]
        labels = new_labels
        if fixpoint or small:
            break
    if np.unique(labels).size < K:
        labels = _repair_empty(space, labels, centers, point_cost, K)
        trace.append(float(point_cost.sum()))
    return labels, centers, trace, n_iter


class KMeansPP(BaseEstimator, ClusterMixin):
    """Lloyd's algorithm seeded by K-Means++.

    Parameters
    ----------
    n_clusters : int, default=8
    metric : {'euclidean', 'dtw'}, default='euclidean'
        With 'dtw' the input is a list of sequences and centroids are DBA
        barycenters. A FeatureMatrix input overrides this with its own metric.
    seed : int, default=42
    max_iter : int, default=300
    tol : float, default=1e-6
        Stop once the relative decrease of the objective falls below it.
    dba_iter : int, default=10
    band : int or None, default=None
        Sakoe-Chiba band for DTW.
    init : sequence of int or None
        Explicit row indices of the initial centroids; skips the seeding.

    Attributes
    ----------
    labels_ : ndarray of int
    cluster_centers_ : list of ndarray
    inertia_trace_ : list of float
        Non-increasing.
    inertia_ : float
    n_iter_ : int
    """

    def __init__(self, n_clusters=8, metric="euclidean", seed=42, max_iter=300, tol=1e-6,
                 dba_iter=10, band=None, init=None):
        self.n_clusters = n_clusters
        self.metric = metric
        self.seed = seed
        self.max_iter = max_iter
        self.tol = tol
        self.dba_iter = dba_iter
        self.band = band
        self.init = init

    def fit(self, X, y=None):
        space = _space(X, self.metric, self.band, self.dba_iter)
        check_scalar_int(self.max_iter, "max_iter", min_val=1)
        labels, centers, trace, n_iter = _lloyd(
            space, self.n_clusters, self.seed, self.max_iter, self.tol, self.init)
        self.metric_ = space.name
        self.labels_ = labels
        self.cluster_centers_ = centers
        self.inertia_trace_ = trace
        self.inertia_ = trace[-1]
        self.n_iter_ = n_iter
        return self

    def predict(self, X):
        space = _space(X, self.metric_)
        return np.argmin(space.costs(self.cluster_centers_), axis=1)


def kmeans_pp(features, K, seed=42, max_iter=300, tol=1e-6, *, band=None, dba_iter=10,
              init=None):
    """Cluster a FeatureMatrix with K-Means++; returns a ClusteringResult.

    Cluster ids are relabeled in order of first appearance.
    """
    K = check_scalar_int(K, "K", min_val=2)
    est = KMeansPP(K, "euclidean", seed, max_iter, tol, dba_iter, band, init).fit(features)
    ids = features.anomaly_ids if isinstance(features, FeatureMatrix) else ()
    return ClusteringResult(
        assignments=canonical_labels(est.labels_), K=K, algorithm="KMeans",
        metric=est.metric_, seed=seed, inertia_trace=tuple(est.inertia_trace_),
        anomaly_ids=ids, n_iter=est.n_iter_,
        feature_set=getattr(features, "feature_set", None),
    )

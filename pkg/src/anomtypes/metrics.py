"""Cluster quality measures and detector-overlap accounting."""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist, squareform

from ._validation import check_2d
from .cluster.dtw import dtw_pairwise
from .cluster.result import ClusteringResult
from .core import interval_iou
from .features.base import FeatureMatrix

__all__ = [
    "SilhouetteResult",
    "SaaiResult",
    "ConsensusMatrix",
    "MetricsReport",
    "pairwise_distances",
    "silhouette",
    "synchronized_pairs",
    "saai",
    "saai_from_counts",
    "gini",
    "consensus_matrix",
    "complementarity_stats",
]


def _labels(assignments):
    if isinstance(assignments, ClusteringResult):
        return assignments.assignments
    return np.asarray(assignments, dtype=np.int64)


def pairwise_distances(features):
    """Distance matrix in the metric the feature matrix declares."""
    if isinstance(features, FeatureMatrix):
        if features.metric == "DTW":
            return dtw_pairwise(features.sequences)
        features = features.data
    return squareform(pdist(check_2d(features, "features")))


@dataclass(frozen=True)
class SilhouetteResult:
    global_score: float
    per_cluster: tuple
    samples: np.ndarray = field(compare=False, repr=False, default=None)


def silhouette(features, assignments, *, distances=None):
    """Silhouette coefficients.

    Objects alone in their cluster score 0. The per-cluster value is the mean
    over that cluster's members and the global score the mean over all
    objects.

    Parameters
    ----------
    features : FeatureMatrix or array-like
        Ignored when `distances` is given.
    assignments : ClusteringResult or array-like of int
    distances : ndarray of shape (n, n), optional
        Precomputed distances, reused across a K sweep.

    Raises
    ------
    ValueError
        With fewer than two clusters, where the coefficient is undefined.
    """
    labels = _labels(assignments)
    D = pairwise_distances(features) if distances is None else np.asarray(distances)
    if D.shape != (labels.size, labels.size):
        raise ValueError("distance matrix does not match the assignments")
    ids = np.unique(labels)
    if ids.size < 2:
        raise ValueError("silhouette is undefined for a single cluster")
    masks = [labels == c for c in ids]
    sizes = np.array([m.sum() for m in masks])
    # mean distance from each object to each cluster
    sums = np.column_stack([D[:, m].sum(axis=1) for m in masks])
    pos = np.searchsorted(ids, labels)
    own = sizes[pos]
    a = np.where(own > 1, sums[np.arange(labels.size), pos] / np.maximum(own - 1, 1), 0.0)
    means = sums / sizes
    means[np.arange(labels.size), pos] = np.inf
    b = means.min(axis=1)
    denom = np.maximum(a, b)
    s = np.zeros(labels.size)
    ok = (own > 1) & (denom > 0)
    s[ok] = (b[ok] - a[ok]) / denom[ok]
    per_cluster = tuple(float(s[m].mean()) for m in masks)
    return SilhouetteResult(float(s.mean()), per_cluster, s)


# -- SAAI -----------------------------------------------------------------

def _channel_key(a):
    return (a.series_id, a.channel if a.channel is not None else a.source_channels)


def synchronized_pairs(anomalies, t_iou=0.3):
    """Index pairs ``(i, j)``, ``i < j``, of temporally aligned anomalies.

    Only pairs on different channels count, and alignment means an interval
    IoU strictly above `t_iou`.
    """
    if not 0 < t_iou <= 1:
        raise ValueError(f"t_iou must lie in (0, 1], got {t_iou}")
    order = sorted(range(len(anomalies)), key=lambda i: anomalies[i].start)
    pairs = []
    for p, i in enumerate(order):
        ai = anomalies[i]
        for j in order[p + 1:]:
            aj = anomalies[j]
            if aj.start >= ai.end:
                break
            if _channel_key(ai) == _channel_key(aj):
                continue
            if interval_iou(ai, aj) > t_iou:
                pairs.append((min(i, j), max(i, j)))
    return sorted(pairs)


@dataclass(frozen=True)
class SaaiResult:
    """SAAI value, or None when no aligned pair exists."""

    value: object
    n_pairs: int
    n_same_cluster: int
    k: int
    n_singletons: int
    t_iou: float
    lambda1: float
    lambda2: float

    @property
    def defined(self):
        return self.value is not None

    def to_dict(self):
        return {
            "value": "undefined" if self.value is None else self.value,
            "t_iou": self.t_iou,
            "lambda": [self.lambda1, self.lambda2],
            "n_pairs": self.n_pairs,
            "n_same_cluster": self.n_same_cluster,
            "k": self.k,
            "n_singletons": self.n_singletons,
        }


def saai_from_counts(k, n_singletons, n_same_cluster, n_pairs, lambda1=0.5, lambda2=0.5):
    """The synchronized-anomaly agreement index from its counts.

    ``lambda1 * n_same_cluster / n_pairs - lambda2 * (1/k + n_singletons/k) + lambda2``;
    None when `n_pairs` is 0.
    """
    if lambda1 < 0 or lambda2 < 0 or abs(lambda1 + lambda2 - 1) > 1e-12:
        raise ValueError("lambda1 and lambda2 must be non-negative and sum to 1")
    if k < 1:
        raise ValueError("k must be >= 1")
    if n_pairs == 0:
        return None
    return lambda1 * n_same_cluster / n_pairs - lambda2 * (1.0 / k + n_singletons / k) + lambda2


def saai(anomalies, assignments, t_iou=0.3, lambda1=0.5, lambda2=0.5):
    """SAAI of a clustering of anomalies from several channels."""
    labels = _labels(assignments)
    if labels.size != len(anomalies):
        raise ValueError("every anomaly needs a cluster id")
    pairs = synchronized_pairs(anomalies, t_iou)
    same = sum(1 for i, j in pairs if labels[i] == labels[j])
    counts = np.unique(labels, return_counts=True)[1]
    k = int(counts.size)
    n1 = int(np.sum(counts == 1))
    value = saai_from_counts(k, n1, same, len(pairs), lambda1, lambda2)
    return SaaiResult(value, len(pairs), same, k, n1, t_iou, lambda1, lambda2)


# -- imbalance --------------------------------------------------------------

def gini(sizes):
    """Gini coefficient of cluster sizes, ``sum|xi - xj| / (2 n sum x)``."""
    x = np.asarray(sizes, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("sizes must be a non-empty 1-D sequence")
    if np.any(x < 0):
        raise ValueError("sizes must be non-negative")
    total = x.sum()
    if total <= 0:
        raise ValueError("at least one size must be positive")
    return float(np.abs(x[:, None] - x[None, :]).sum() / (2 * x.size * total))


# -- consensus -----------------------------------------------------------

@dataclass(frozen=True)
class ConsensusMatrix:
    values: np.ndarray
    matched: tuple
    feature_set_a: str = None
    feature_set_b: str = None

    def to_dict(self):
        return {
            "pair": [self.feature_set_a, self.feature_set_b],
            "matrix": self.values.tolist(),
            "matched": [list(p) for p in self.matched],
        }


def consensus_matrix(a, b, threshold=0.5):
    """Pairwise IoU of the clusters of two clusterings of the same anomalies.

    Cluster pairs with IoU at or above `threshold` are reported as matched.
    """
    if set(a.anomaly_ids) != set(b.anomaly_ids) or len(a.anomaly_ids) != len(b.anomaly_ids):
        raise ValueError("clusterings cover different anomaly sets")
    pos = {aid: i for i, aid in enumerate(a.anomaly_ids)}
    lb = np.empty(len(pos), dtype=np.int64)
    for aid, c in zip(b.anomaly_ids, b.assignments):
        lb[pos[aid]] = c
    la = a.assignments
    M = np.zeros((a.K, b.K))
    for i in range(a.K):
        in_a = la == i
        for j in range(b.K):
            in_b = lb == j
            union = np.count_nonzero(in_a | in_b)
            M[i, j] = np.count_nonzero(in_a & in_b) / union if union else 0.0
    matched = tuple((int(i), int(j)) for i, j in zip(*np.nonzero(M >= threshold)))
    return ConsensusMatrix(M, matched, a.feature_set, b.feature_set)


# -- detector complementarity --------------------------------------------

def _coverage(intervals):
    cov = {}
    for iv in intervals:
        cov.setdefault(_channel_key(iv), set()).update(range(iv.start, iv.end))
    return cov


def complementarity_stats(a, b):
    """How much two detectors' anomaly sets overlap.

    By count, intervals overlapping at least one interval of the other
    detector on the same channel form connected groups; each group counts
    once as joint, the remaining intervals as a-only or b-only. By length,
    the covered index sets A and B of each channel are split into A\\B, B\\A
    and their intersection. Percentages are relative to the totals of each
    accounting.
    """
    a, b = list(a), list(b)
    na = len(a)
    parent = list(range(na + len(b)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    touched = np.zeros(na + len(b), dtype=bool)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            if _channel_key(x) == _channel_key(y) and interval_iou(x, y) > 0:
                touched[i] = touched[na + j] = True
                ri, rj = find(i), find(na + j)
                parent[max(ri, rj)] = min(ri, rj)
    a_only = int(np.sum(~touched[:na]))
    b_only = int(np.sum(~touched[na:]))
    joint = len({find(i) for i in np.flatnonzero(touched)})
    total = a_only + b_only + joint

    ca, cb = _coverage(a), _coverage(b)
    la = lb = lj = 0
    for key in set(ca) | set(cb):
        sa, sb = ca.get(key, set()), cb.get(key, set())
        la += len(sa - sb)
        lb += len(sb - sa)
        lj += len(sa & sb)
    covered = la + lb + lj

    def pct(v, tot):
        return 100.0 * v / tot if tot else 0.0

    return {
        "count": {"a_only": a_only, "b_only": b_only, "joint": joint},
        "count_pct": {"a_only": pct(a_only, total), "b_only": pct(b_only, total),
                      "joint": pct(joint, total)},
        "length": {"a_only": la, "b_only": lb, "joint": lj},
        "length_pct": {"a_only": pct(la, covered), "b_only": pct(lb, covered),
                       "joint": pct(lj, covered)},
    }


# -- report ----------------------------------------------------------------

@dataclass
class MetricsReport:
    """Collected metrics of one clustering plus cross-cutting statistics."""

    ssc: SilhouetteResult = None
    saai: SaaiResult = None
    gini: float = None
    consensus: list = field(default_factory=list)
    complementarity: dict = field(default_factory=dict)

    def to_dict(self):
        out = {}
        if self.ssc is not None:
            out["ssc"] = {"global": self.ssc.global_score, "per_cluster": list(self.ssc.per_cluster)}
        else:
            out["ssc"] = {"global": "undefined", "per_cluster": []}
        out["saai"] = self.saai.to_dict() if self.saai is not None else {"value": "undefined"}
        out["gini"] = self.gini
        out["consensus"] = [c.to_dict() for c in self.consensus]
        out["complementarity"] = self.complementarity
        return out

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)

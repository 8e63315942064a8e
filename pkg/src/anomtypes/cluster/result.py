"""Clustering output and its persistence."""

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..features.base import atomic_write_text

__all__ = ["ClusteringResult", "canonical_labels"]


def canonical_labels(labels):
    """Relabel so cluster ids appear in order of their first member."""
    labels = np.asarray(labels)
    mapping = {}
    out = np.empty(labels.shape[0], dtype=np.int64)
    for i, lab in enumerate(labels):
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out[i] = mapping[lab]
    return out


@dataclass(frozen=True, eq=False)
class ClusteringResult:
    """A flat partition of a feature matrix's rows.

    Attributes
    ----------
    assignments : ndarray of int, shape (n_rows,)
        Cluster id in ``[0, K)`` per row; every id is used.
    K : int
    algorithm : {'KMeans', 'HAC'}
    metric : {'DTW', 'Euclidean'}
    seed : int or None
    inertia_trace : tuple of float
        KMeans only; objective after every Lloyd iteration.
    anomaly_ids : tuple of str
    n_iter : int
    merge_distances : tuple of float
        HAC only; squared centroid distance of every applied merge.
    """

    assignments: np.ndarray
    K: int
    algorithm: str
    metric: str
    seed: object = None
    inertia_trace: tuple = ()
    anomaly_ids: tuple = ()
    n_iter: int = 0
    merge_distances: tuple = ()
    feature_set: str = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        a = np.asarray(self.assignments, dtype=np.int64)
        if a.ndim != 1:
            raise ValueError("assignments must be one-dimensional")
        if self.algorithm not in ("KMeans", "HAC"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.metric not in ("DTW", "Euclidean"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if a.size and (a.min() < 0 or a.max() >= self.K):
            raise ValueError("cluster ids must lie in [0, K)")
        if a.size and np.unique(a).size != self.K:
            raise ValueError(f"expected {self.K} non-empty clusters, got {np.unique(a).size}")
        ids = tuple(self.anomaly_ids) or tuple(str(i) for i in range(a.size))
        if len(ids) != a.size:
            raise ValueError("one anomaly id per assignment required")
        a.setflags(write=False)
        object.__setattr__(self, "assignments", a)
        object.__setattr__(self, "anomaly_ids", ids)
        object.__setattr__(self, "inertia_trace", tuple(float(v) for v in self.inertia_trace))
        object.__setattr__(self, "merge_distances", tuple(float(v) for v in self.merge_distances))

    @property
    def sizes(self):
        return np.bincount(self.assignments, minlength=self.K)

    def members(self):
        """List of index sets, one per cluster id."""
        return [frozenset(np.flatnonzero(self.assignments == c).tolist()) for c in range(self.K)]

    def provenance(self):
        return {
            "algorithm": self.algorithm,
            "K": self.K,
            "metric": self.metric,
            "seed": self.seed,
            "iterations": self.n_iter,
            "inertia_trace": list(self.inertia_trace),
            "merge_distances": list(self.merge_distances),
            "feature_set": self.feature_set,
            **self.extra,
        }

    def save(self, path):
        path = Path(path)
        lines = ["anomaly_id,cluster_id"]
        for aid, c in zip(self.anomaly_ids, self.assignments):
            field_ = f'"{aid}"' if "," in aid else aid
            lines.append(f"{field_},{int(c)}")
        atomic_write_text(path, "\n".join(lines) + "\n")
        meta = path.with_name(path.name + ".json")
        atomic_write_text(meta, json.dumps(self.provenance(), indent=2, sort_keys=True))
        return path, meta

    @classmethod
    def load(cls, path):
        path = Path(path)
        prov = json.loads(path.with_name(path.name + ".json").read_text())
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            rows = [(r[0], int(r[1])) for r in reader]
        known = {"algorithm", "K", "metric", "seed", "iterations", "inertia_trace",
                 "merge_distances", "feature_set"}
        return cls(
            assignments=np.array([c for _, c in rows], dtype=np.int64),
            K=prov["K"], algorithm=prov["algorithm"], metric=prov["metric"],
            seed=prov.get("seed"), inertia_trace=tuple(prov.get("inertia_trace", ())),
            anomaly_ids=tuple(a for a, _ in rows), n_iter=prov.get("iterations", 0),
            merge_distances=tuple(prov.get("merge_distances", ())),
            feature_set=prov.get("feature_set"),
            extra={k: v for k, v in prov.items() if k not in known},
        )

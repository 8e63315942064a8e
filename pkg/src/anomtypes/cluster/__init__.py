"""Distances and clustering algorithms for anomaly feature matrices."""

from .dtw import dba, dtw_distance, dtw_pairwise, dtw_path
from .hac import CentroidHAC, centroid_dendrogram, cut_dendrogram, hac_centroid
from .kmeans import KMeansPP, kmeans_pp
from .result import ClusteringResult, canonical_labels

__all__ = [
    "dba",
    "dtw_distance",
    "dtw_pairwise",
    "dtw_path",
    "CentroidHAC",
    "centroid_dendrogram",
    "cut_dendrogram",
    "hac_centroid",
    "KMeansPP",
    "kmeans_pp",
    "ClusteringResult",
    "canonical_labels",
]

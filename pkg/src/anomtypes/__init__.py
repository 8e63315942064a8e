"""Anomaly-type discovery: detect anomalous subsequences, featurize and cluster them."""

from ._validation import SchemaError, SpacingError
from .cluster import ClusteringResult, hac_centroid, kmeans_pp
from .config import PipelineConfig, load_config
from .core import AnomalyInterval, CsvSchema, Subsequence, TimeSeries, load_csv, write_csv
from .damp import DAMP, damp_detect, left_profile_brute
from .features import (FeatureMatrix, extract_catch22, extract_crafted, extract_denoised,
                       extract_rocket)
from .mdi import MDI, kl_gaussian, mdi_scan
from .metrics import (complementarity_stats, consensus_matrix, gini, saai, saai_from_counts,
                      silhouette)

__version__ = "0.1.0"

__all__ = [
    "SchemaError",
    "SpacingError",
    "ClusteringResult",
    "hac_centroid",
    "kmeans_pp",
    "PipelineConfig",
    "load_config",
    "AnomalyInterval",
    "CsvSchema",
    "Subsequence",
    "TimeSeries",
    "load_csv",
    "write_csv",
    "DAMP",
    "damp_detect",
    "left_profile_brute",
    "FeatureMatrix",
    "extract_catch22",
    "extract_crafted",
    "extract_denoised",
    "extract_rocket",
    "MDI",
    "kl_gaussian",
    "mdi_scan",
    "complementarity_stats",
    "consensus_matrix",
    "gini",
    "saai",
    "saai_from_counts",
    "silhouette",
]

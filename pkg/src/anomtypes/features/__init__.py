"""Feature extraction for anomalous subsequences."""

from .base import FEATURE_SETS, METRIC_FOR_SET, FeatureMatrix, MissingReferenceError, slice_anomalies
from .catch22 import CATCH22_NAMES, REGISTRIES, catch22_vector, register_feature
from .extract import (
    CRAFTED_COLUMNS,
    Catch22Features,
    CraftedFeatures,
    DenoisedFeatures,
    RocketFeatures,
    crafted_vector,
    extract_catch22,
    extract_crafted,
    extract_denoised,
    extract_rocket,
    normalized_variance,
)
from .rocket import RandomKernel, apply_kernels, generate_kernels, kernel_hash

__all__ = [
    "FEATURE_SETS",
    "METRIC_FOR_SET",
    "FeatureMatrix",
    "MissingReferenceError",
    "slice_anomalies",
    "CATCH22_NAMES",
    "REGISTRIES",
    "catch22_vector",
    "register_feature",
    "CRAFTED_COLUMNS",
    "Catch22Features",
    "CraftedFeatures",
    "DenoisedFeatures",
    "RocketFeatures",
    "crafted_vector",
    "extract_catch22",
    "extract_crafted",
    "extract_denoised",
    "extract_rocket",
    "normalized_variance",
    "RandomKernel",
    "apply_kernels",
    "generate_kernels",
    "kernel_hash",
]

"""Scikit-learn style transformers for the four feature sets.

Every transformer takes a list of subsequences, 1-D or ``(length, d)``.
Multichannel subsequences are handled channel by channel and the resulting
columns concatenated (suffix ``@c<k>``); Denoised keeps the channels as the
second axis of each sequence.
"""

import logging
import warnings

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import check_scalar_int, check_subsequences
from ..core import MIN_ANOMALY_LENGTH, ZNORM_EPS, moving_average, znormalize
from .base import FeatureMatrix, anomaly_ids, slice_anomalies, zscore_columns
from .catch22 import catch22_vector, resolve_registry
from .rocket import _pack, apply_kernels, generate_kernels, kernel_hash, pca_fit

__all__ = [
    "CRAFTED_COLUMNS",
    "crafted_vector",
    "DenoisedFeatures",
    "CraftedFeatures",
    "RocketFeatures",
    "Catch22Features",
    "normalized_variance",
    "extract_denoised",
    "extract_crafted",
    "extract_rocket",
    "extract_catch22",
]

logger = logging.getLogger(__name__)

CRAFTED_COLUMNS = ("mean", "variance", "kurtosis", "skewness", "length",
                   "min", "max", "argmin_rel", "argmax_rel")


def _channels(X):
    return check_subsequences(X, min_length=MIN_ANOMALY_LENGTH)


def _column_names(base, d):
    if d == 1:
        return tuple(base)
    return tuple(f"{name}@c{c}" for c in range(d) for name in base)


def _per_channel(seqs, func):
    return np.array([np.concatenate([func(s[:, c]) for c in range(s.shape[1])])
                     for s in seqs])


def crafted_vector(x):
    """Nine summary statistics of one sequence, population moments.

    Order: mean, variance, excess kurtosis, skewness, length, min, max and
    the relative positions (in [0, 1], first occurrence) of min and max.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    mu = x.mean()
    c = x - mu
    m2 = np.mean(c * c)
    if m2 <= ZNORM_EPS ** 2:
        skew = kurt = 0.0
    else:
        skew = np.mean(c ** 3) / m2 ** 1.5
        kurt = np.mean(c ** 4) / m2 ** 2 - 3.0
    span = max(n - 1, 1)
    return np.array([mu, m2, kurt, skew, float(n), x.min(), x.max(),
                     np.argmin(x) / span, np.argmax(x) / span])


def normalized_variance(F):
    """Column variance divided by the squared mean absolute value."""
    F = np.asarray(F, dtype=np.float64)
    scale = np.mean(np.abs(F), axis=0) ** 2
    var = F.var(axis=0)
    out = np.zeros(F.shape[1])
    ok = scale > 0
    out[ok] = var[ok] / scale[ok]
    return out


class DenoisedFeatures(BaseEstimator, TransformerMixin):
    """Z-normalize then smooth with a centered moving average.

    Parameters
    ----------
    window : int, default=5
    """

    def __init__(self, window=5):
        self.window = window

    def fit(self, X, y=None):
        check_scalar_int(self.window, "window", min_val=1)
        self.n_channels_ = _channels(X)[0].shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_channels_")
        out = []
        for s in _channels(X):
            cols = [moving_average(znormalize(s[:, c]), self.window) for c in range(s.shape[1])]
            out.append(cols[0] if len(cols) == 1 else np.column_stack(cols))
        return out


class CraftedFeatures(BaseEstimator, TransformerMixin):
    """Nine statistical features per channel, z-scored across the fitted set."""

    def fit(self, X, y=None):
        raw = self._raw(X)
        _, self.mean_, self.scale_ = zscore_columns(raw)
        self.n_channels_ = _channels(X)[0].shape[1]
        self.feature_names_out_ = _column_names(CRAFTED_COLUMNS, self.n_channels_)
        return self

    def _raw(self, X):
        return _per_channel(_channels(X), crafted_vector)

    def raw_features(self, X):
        """Features before the column z-score."""
        return self._raw(X)

    def transform(self, X):
        check_is_fitted(self, "mean_")
        Z, _, _ = zscore_columns(self._raw(X), self.mean_, self.scale_)
        return Z

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "feature_names_out_")
        return np.array(self.feature_names_out_, dtype=object)


class RocketFeatures(BaseEstimator, TransformerMixin):
    """Random-kernel features reduced by PCA.

    Each subsequence is z-normalized per channel and convolved with every
    kernel; max and proportion of positive values per kernel are z-scored
    across the fitted set, projected onto the leading principal components
    and z-scored again.

    Parameters
    ----------
    n_kernels : int, default=1000
    pca_components : int, default=10
    seed : int, default=42
    max_input_length : int or None
        Length used to bound dilations; defaults to the longest fitted
        subsequence.
    """

    def __init__(self, n_kernels=1000, pca_components=10, seed=42, max_input_length=None):
        self.n_kernels = n_kernels
        self.pca_components = pca_components
        self.seed = seed
        self.max_input_length = max_input_length

    def fit(self, X, y=None):
        seqs = _channels(X)
        check_scalar_int(self.pca_components, "pca_components", min_val=1)
        max_len = self.max_input_length or max(s.shape[0] for s in seqs)
        self.kernels_ = generate_kernels(self.n_kernels, self.seed, max(max_len, 7))
        self._packed = _pack(self.kernels_)
        raw = self._raw(seqs)
        Z, self.raw_mean_, self.raw_scale_ = zscore_columns(raw)
        k = self.pca_components
        limit = min(raw.shape[1], len(seqs))
        if k > limit:
            warnings.warn(f"pca_components={k} exceeds min(features, rows)={limit}; "
                          f"using {limit}", UserWarning, stacklevel=2)
            k = limit
        self.n_components_ = k
        self.pca_mean_, self.components_, self.explained_variance_ = pca_fit(Z, k)
        P = (Z - self.pca_mean_) @ self.components_.T
        _, self.out_mean_, self.out_scale_ = zscore_columns(P)
        self.kernel_hash_ = kernel_hash(self.kernels_)
        return self

    def _raw(self, seqs):
        packed = self._packed
        return np.array([
            np.concatenate([apply_kernels(znormalize(s[:, c]), None, packed)
                            for c in range(s.shape[1])])
            for s in seqs
        ])

    def raw_features(self, X):
        check_is_fitted(self, "kernels_")
        return self._raw(_channels(X))

    def project(self, X):
        """PCA scores before the final z-score."""
        check_is_fitted(self, "components_")
        Z, _, _ = zscore_columns(self._raw(_channels(X)), self.raw_mean_, self.raw_scale_)
        return (Z - self.pca_mean_) @ self.components_.T

    def transform(self, X):
        P = self.project(X)
        out, _, _ = zscore_columns(P, self.out_mean_, self.out_scale_)
        return out

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "n_components_")
        return np.array([f"pc{i}" for i in range(self.n_components_)], dtype=object)


class Catch22Features(BaseEstimator, TransformerMixin):
    """Canonical characteristics with low-variance column filtering.

    Columns whose normalized variance (see :func:`normalized_variance`) over
    the fitted set is at most `variance_threshold` are dropped, the rest are
    z-scored.

    Parameters
    ----------
    variance_threshold : float, default=0.01
    registry : str or sequence of str, default='catch22'
        Named registry ('catch22', 'extended', 'minimal') or explicit
        feature names.
    """

    def __init__(self, variance_threshold=0.01, registry="catch22"):
        self.variance_threshold = variance_threshold
        self.registry = registry

    def _raw(self, seqs):
        names = resolve_registry(self.registry)
        return _per_channel(seqs, lambda y: catch22_vector(y, names))

    def raw_features(self, X):
        return self._raw(_channels(X))

    def fit(self, X, y=None):
        seqs = _channels(X)
        names = resolve_registry(self.registry)
        self.n_channels_ = seqs[0].shape[1]
        all_names = _column_names(names, self.n_channels_)
        raw = self._raw(seqs)
        self.normalized_variance_ = normalized_variance(raw)
        self.support_ = self.normalized_variance_ > self.variance_threshold
        if not self.support_.any():
            raise ValueError(
                f"every feature has normalized variance <= {self.variance_threshold}; "
                "decrease variance_threshold"
            )
        self.feature_names_out_ = tuple(n for n, keep in zip(all_names, self.support_) if keep)
        _, self.mean_, self.scale_ = zscore_columns(raw[:, self.support_])
        logger.debug("catch22: kept %d of %d columns", self.support_.sum(), raw.shape[1])
        return self

    def transform(self, X):
        check_is_fitted(self, "support_")
        raw = self._raw(_channels(X))[:, self.support_]
        Z, _, _ = zscore_columns(raw, self.mean_, self.scale_)
        return Z

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "feature_names_out_")
        return np.array(self.feature_names_out_, dtype=object)


# -- anomaly-level entry points -------------------------------------------

def extract_denoised(anomalies, series, window=5):
    seqs = slice_anomalies(anomalies, series)
    out = DenoisedFeatures(window).fit_transform(seqs)
    return FeatureMatrix(anomaly_ids(anomalies), "Denoised", "DTW", sequences=tuple(out),
                         meta={"window": window})


def extract_crafted(anomalies, series):
    seqs = slice_anomalies(anomalies, series)
    tr = CraftedFeatures().fit(seqs)
    return FeatureMatrix(anomaly_ids(anomalies), "Crafted", "Euclidean", data=tr.transform(seqs),
                         columns=tr.feature_names_out_)


def extract_rocket(anomalies, series, n_kernels=1000, pca_components=10, seed=42):
    seqs = slice_anomalies(anomalies, series)
    tr = RocketFeatures(n_kernels, pca_components, seed).fit(seqs)
    return FeatureMatrix(
        anomaly_ids(anomalies), "Rocket", "Euclidean", data=tr.transform(seqs),
        columns=tuple(tr.get_feature_names_out()),
        meta={"seed": seed, "n_kernels": n_kernels, "pca_components": tr.n_components_,
              "kernel_hash": tr.kernel_hash_},
    )


def extract_catch22(anomalies, series, variance_threshold=0.01, registry="catch22"):
    seqs = slice_anomalies(anomalies, series)
    tr = Catch22Features(variance_threshold, registry).fit(seqs)
    return FeatureMatrix(
        anomaly_ids(anomalies), "Catch22", "Euclidean", data=tr.transform(seqs),
        columns=tr.feature_names_out_,
        meta={"variance_threshold": variance_threshold,
              "registry": registry if isinstance(registry, str) else list(registry)},
    )

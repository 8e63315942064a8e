"""Maximally divergent intervals with Gaussian density models.

An interval is scored by the KL divergence between a Gaussian fitted to the
points inside it and a Gaussian fitted to the rest of the series. Candidate
intervals come either from a dense grid or from runs of high pointwise
Hotelling's T^2 scores.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_1d, check_2d, check_scalar_int
from .core import AnomalyInterval, TimeSeries, interval_iou

__all__ = [
    "GaussianModel",
    "IntervalProposal",
    "time_delay_embed",
    "auto_embedding_dim",
    "hotellings_scores",
    "propose_intervals",
    "kl_gaussian",
    "mdi_scan",
    "candidate_intervals",
    "MDI",
]

logger = logging.getLogger(__name__)

REG_SCALE = 1e-6
NMS_IOU = 0.5


def _regularizer(cov):
    d = cov.shape[-1]
    return REG_SCALE * np.trace(cov) / d


@dataclass(frozen=True, eq=False)
class GaussianModel:
    """Multivariate normal with population (biased) covariance."""

    mean: np.ndarray
    covariance: np.ndarray
    count: int

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=np.float64))
        if cov.shape != (mean.shape[0], mean.shape[0]):
            raise ValueError(f"covariance shape {cov.shape} does not match mean {mean.shape}")
        if not np.allclose(cov, cov.T, atol=1e-10, rtol=0):
            raise ValueError("covariance must be symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self):
        return self.mean.shape[0]

    @classmethod
    def fit(cls, X, reg=0.0):
        """Fit to the rows of `X`, adding `reg` to the covariance diagonal."""
        X = check_2d(X)
        mu = X.mean(axis=0)
        Xc = X - mu
        cov = Xc.T @ Xc / X.shape[0]
        cov = 0.5 * (cov + cov.T) + reg * np.eye(X.shape[1])
        return cls(mu, cov, X.shape[0])


@dataclass(frozen=True)
class IntervalProposal:
    start: int
    end: int
    pointwise_peak: float

    def __post_init__(self):
        if self.end - self.start < 1:
            raise ValueError("proposal must cover at least one index")


# ------------------------------------------------------------------ preprocessing


def _values(ts):
    if isinstance(ts, TimeSeries):
        return ts.values
    return check_2d(ts, "ts")


def time_delay_embed(ts, lag=1, dim=1):
    """Stack each observation with its `dim - 1` lagged predecessors.

    Row ``i`` is ``[p_i, p_{i-lag}, ..., p_{i-(dim-1)lag}]``; indices before
    the start are clamped to the first row.
    """
    X = _values(ts)
    lag = check_scalar_int(lag, "lag", min_val=1)
    dim = check_scalar_int(dim, "dim", min_val=1)
    n = X.shape[0]
    if n <= lag * (dim - 1):
        raise ValueError(f"series of length {n} is too short for lag={lag}, dim={dim}")
    idx = np.arange(n)
    blocks = [X[np.maximum(idx - k * lag, 0)] for k in range(dim)]
    out = np.hstack(blocks)
    if isinstance(ts, TimeSeries):
        names = [name if k == 0 else f"{name}_lag{k * lag}"
                 for k in range(dim) for name in ts.channel_names]
        return ts.with_values(out, names)
    return out


def auto_embedding_dim(ts, max_dim=3):
    """Embedding dimension from the autocorrelation decay of the first channel.

    The dimension equals the first lag at which the autocorrelation falls
    below ``1/e``, capped at `max_dim`. Constant channels give 1.
    """
    x = _values(ts)[:, 0]
    x = x - x.mean()
    denom = np.dot(x, x)
    if denom <= 0:
        return 1
    thresh = 1.0 / math.e
    for lag in range(1, max_dim):
        if lag >= x.shape[0]:
            break
        if np.dot(x[:-lag], x[lag:]) / denom < thresh:
            return lag
    return max_dim


def hotellings_scores(ts):
    """Squared Mahalanobis distance of every observation to the global fit.

    Channels are standardized first, so the ``1e-6 * trace / d`` ridge acts
    on the correlation matrix and the scores do not depend on channel units.
    """
    X = _values(ts)
    d = X.shape[1]
    if X.shape[0] <= d:
        raise ValueError(f"need more than {d} observations for a {d}-dim covariance")
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    # per-channel standardization keeps the regularized score scale invariant
    Xc = (X - mu) / np.where(sd > 0, sd, 1.0)
    cov = Xc.T @ Xc / X.shape[0]
    reg = _regularizer(cov)
    if reg <= 0:
        return np.zeros(X.shape[0])
    cov += reg * np.eye(d)
    sol = np.linalg.solve(cov, Xc.T)
    return np.einsum("ij,ji->i", Xc, sol)


def propose_intervals(scores, quantile=0.99, L_min=144, L_max=288):
    """Turn runs of high pointwise scores into candidate intervals.

    Indices scoring strictly above the `quantile` of `scores` form runs;
    runs separated by fewer than ``L_min / 2`` indices are merged. Each run
    is widened symmetrically to at least `L_min` and runs longer than
    `L_max` are cut into `L_max` chunks overlapping by half.
    """
    scores = check_1d(scores, "scores")
    if not 0.0 < quantile < 1.0:
        raise ValueError(f"quantile must be in (0, 1), got {quantile}")
    L_min = check_scalar_int(L_min, "L_min", min_val=5)
    L_max = check_scalar_int(L_max, "L_max", min_val=L_min)
    n = scores.shape[0]
    thr = np.quantile(scores, quantile)
    above = scores > thr
    if not above.any():
        return []
    edges = np.diff(np.concatenate(([0], above.astype(np.int8), [0])))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)

    runs = [[int(starts[0]), int(ends[0])]]
    for s, e in zip(starts[1:], ends[1:]):
        if s - runs[-1][1] < L_min / 2:
            runs[-1][1] = int(e)
        else:
            runs.append([int(s), int(e)])

    out = []
    for s, e in runs:
        if e - s < L_min:
            width = min(L_min, n)
            s = int(math.floor((s + e) / 2 - width / 2))
            s = min(max(s, 0), n - width)
            e = s + width
        if e - s <= L_max:
            pieces = [(s, e)]
        else:
            step = max(1, L_max // 2)
            pieces = [(a, a + L_max) for a in range(s, e - L_max + 1, step)]
            if pieces[-1][1] < e:
                pieces.append((e - L_max, e))
        for a, b in pieces:
            out.append(IntervalProposal(a, b, float(scores[a:b].max())))
    return out


# --------------------------------------------------------------------- divergence


def _kl_batch(mu_p, cov_p, mu_q, cov_q):
    """KL(p || q) for stacks of Gaussians, shapes (..., d) and (..., d, d)."""
    d = mu_p.shape[-1]
    inv_q = np.linalg.inv(cov_q)
    diff = mu_q - mu_p
    maha = np.einsum("...i,...ij,...j->...", diff, inv_q, diff)
    trace = np.einsum("...ij,...ji->...", inv_q, cov_p)
    _, logdet_p = np.linalg.slogdet(cov_p)
    _, logdet_q = np.linalg.slogdet(cov_q)
    return 0.5 * (trace + maha - d + logdet_q - logdet_p)


def kl_gaussian(p, q):
    """Closed-form ``KL(p || q)`` between two :class:`GaussianModel` instances."""
    if p.dim != q.dim:
        raise ValueError(f"dimension mismatch: {p.dim} vs {q.dim}")
    kl = float(_kl_batch(p.mean, p.covariance, q.mean, q.covariance))
    return max(kl, 0.0)


def _unbiased(kl, length, d):
    # 2*L*KL of an interval drawn from the rest is asymptotically chi^2 with
    # d + d(d+1)/2 degrees of freedom; standardize by its mean and sd
    dof = d + d * (d + 1) / 2.0
    return (2.0 * length * kl - dof) / math.sqrt(2.0 * dof)


# ------------------------------------------------------------------- candidates


def _length_grid(L_min, L_max, step):
    lengths = list(range(L_min, L_max + 1, step))
    if lengths[-1] != L_max:
        lengths.append(L_max)
    return np.array(lengths)


def candidate_intervals(n, L_min, L_max, proposals=None, step=1):
    """Candidate ``(start, end)`` pairs as an ``(m, 2)`` integer array.

    Without proposals the whole series is covered by a grid of starts and
    lengths spaced `step` apart. With proposals only intervals whose start
    lies within half a proposal length of a proposal's start are kept, which
    lets the scan refine both boundaries around every proposal.
    """
    lengths = _length_grid(L_min, L_max, step)
    if proposals is None:
        starts = np.arange(0, n - L_min + 1, step)
    else:
        pieces = []
        for p in proposals:
            half = (p.end - p.start) // 2
            lo = max(0, p.start - half)
            hi = min(n - L_min, p.start + half)
            if hi >= lo:
                # align to the global grid so proposal scans are a subset of full scans
                lo = -(-lo // step) * step
                pieces.append(np.arange(lo, hi + 1, step))
        if not pieces:
            return np.empty((0, 2), dtype=np.int64)
        starts = np.unique(np.concatenate(pieces))
    a = np.repeat(starts, lengths.shape[0])
    b = a + np.tile(lengths, starts.shape[0])
    keep = b <= n
    return np.stack([a[keep], b[keep]], axis=1).astype(np.int64)


def _score_candidates(X, cands, divergence, chunk=4096):
    n, d = X.shape
    # KL is translation invariant; centering keeps the cumulative sums well conditioned
    X = X - X.mean(axis=0)
    C = np.concatenate([np.zeros((1, d)), np.cumsum(X, axis=0)])
    outer = np.einsum("ni,nj->nij", X, X)
    O = np.concatenate([np.zeros((1, d, d)), np.cumsum(outer, axis=0)])
    total_mu = C[-1] / n
    global_cov = O[-1] / n - np.outer(total_mu, total_mu)
    reg = _regularizer(global_cov)
    if reg <= 0:
        reg = 1e-12
    eye = reg * np.eye(d)
    scores = np.empty(cands.shape[0])
    for lo in range(0, cands.shape[0], chunk):
        a = cands[lo:lo + chunk, 0]
        b = cands[lo:lo + chunk, 1]
        L = (b - a).astype(np.float64)
        s_sum = C[b] - C[a]
        s_out = O[b] - O[a]
        mu_s = s_sum / L[:, None]
        cov_s = s_out / L[:, None, None] - np.einsum("ki,kj->kij", mu_s, mu_s)
        rest = n - L
        mu_o = (C[-1] - s_sum) / rest[:, None]
        cov_o = (O[-1] - s_out) / rest[:, None, None] - np.einsum("ki,kj->kij", mu_o, mu_o)
        cov_s = 0.5 * (cov_s + np.swapaxes(cov_s, 1, 2)) + eye
        cov_o = 0.5 * (cov_o + np.swapaxes(cov_o, 1, 2)) + eye
        kl = np.maximum(_kl_batch(mu_s, cov_s, mu_o, cov_o), 0.0)
        if divergence == "unbiased":
            kl = _unbiased(kl, L, d)
        scores[lo:lo + chunk] = kl
    return scores


def _non_max_suppression(cands, scores, top_k, iou_max=NMS_IOU):
    order = np.lexsort((cands[:, 1], cands[:, 0], -scores))
    kept = []
    for idx in order:
        if len(kept) >= top_k:
            break
        a, b = cands[idx]
        if all(interval_iou((a, b), cands[j]) <= iou_max for j in kept):
            kept.append(idx)
    return kept


def mdi_scan(ts, L_min=144, L_max=288, proposals=None, top_k=10, *, full_scan=False,
             step=None, divergence="kl", series_id=None, channel=None):
    """Score candidate intervals and return the top non-overlapping ones.

    Parameters
    ----------
    ts : TimeSeries or array-like of shape (n, d)
        Usually the time-delay embedded series.
    proposals : list of IntervalProposal, optional
        Regions to refine. Required unless `full_scan` is set.
    top_k : int
        Number of intervals to return. Kept intervals overlap pairwise with
        IoU of at most 0.5.
    step : int, optional
        Grid spacing of candidate starts and lengths; defaults to
        ``max(1, L_min // 24)``.
    divergence : {"kl", "unbiased"}
        Plain KL divergence of interval vs. rest, or the length-corrected
        statistic ``(2 L KL - v) / sqrt(2 v)`` with ``v = d + d(d+1)/2``.

    Returns
    -------
    list of AnomalyInterval
        Sorted by score (descending), ties by start.
    """
    L_min = check_scalar_int(L_min, "L_min", min_val=5)
    L_max = check_scalar_int(L_max, "L_max", min_val=L_min)
    top_k = check_scalar_int(top_k, "top_k", min_val=0)
    if divergence not in ("kl", "unbiased"):
        raise ValueError(f"unknown divergence {divergence!r}")
    if not full_scan and proposals is None:
        raise ValueError("pass proposals or set full_scan=True")
    if top_k == 0:
        return []
    X = _values(ts)
    n, d = X.shape
    if series_id is None:
        series_id = ts.series_id if isinstance(ts, TimeSeries) else "series"
    if step is None:
        step = max(1, L_min // 24)
    step = check_scalar_int(step, "step", min_val=1)
    if n - L_min < 1:
        logger.warning("series of length %d too short for L_min=%d", n, L_min)
        return []
    L_max = min(L_max, n - 1)
    cands = candidate_intervals(n, L_min, L_max, None if full_scan else proposals, step)
    too_short = (cands[:, 1] - cands[:, 0]) <= d
    if too_short.any():
        logger.info("skipping %d candidates shorter than %d points", too_short.sum(), d + 1)
        cands = cands[~too_short]
    if cands.shape[0] == 0:
        return []
    scores = _score_candidates(X, cands, divergence)
    positive = scores > 0
    cands, scores = cands[positive], scores[positive]
    kept = _non_max_suppression(cands, scores, top_k)
    return [
        AnomalyInterval(int(cands[i, 0]), int(cands[i, 1]), float(scores[i]), "MDI",
                        channel=channel, series_id=series_id)
        for i in kept
    ]


class MDI(BaseEstimator):
    """Maximally divergent interval detector.

    Parameters
    ----------
    L_min, L_max : int, default=144, 288
        Interval length bounds.
    top_k : int, default=10
        Maximum number of intervals per series.
    proposals : {"hotellings_t", "dense"}, default="hotellings_t"
        Candidate source.
    quantile : float, default=0.99
        Pointwise score quantile that triggers a proposal.
    preproc : {"td", None}, default="td"
        Time-delay embedding with automatically chosen dimension, or none.
    td_lag : int, default=1
    divergence : {"kl", "unbiased"}, default="kl"
    step : int or None
        Candidate grid spacing, see :func:`mdi_scan`.

    Attributes
    ----------
    anomalies_ : list of AnomalyInterval
    embedding_dim_ : int
    proposals_ : list of IntervalProposal or None
    """

    def __init__(self, L_min=144, L_max=288, top_k=10, proposals="hotellings_t",
                 quantile=0.99, preproc="td", td_lag=1, divergence="kl", step=None):
        self.L_min = L_min
        self.L_max = L_max
        self.top_k = top_k
        self.proposals = proposals
        self.quantile = quantile
        self.preproc = preproc
        self.td_lag = td_lag
        self.divergence = divergence
        self.step = step

    def fit(self, X, y=None, *, channel=None):
        if isinstance(X, TimeSeries):
            ts = X
        else:
            ts = TimeSeries.from_array(check_2d(X))
        if self.preproc == "td":
            self.embedding_dim_ = auto_embedding_dim(ts)
            emb = time_delay_embed(ts, self.td_lag, self.embedding_dim_)
        elif self.preproc is None:
            self.embedding_dim_ = 1
            emb = ts
        else:
            raise ValueError(f"unknown preproc {self.preproc!r}")
        if self.proposals == "hotellings_t":
            scores = hotellings_scores(emb)
            self.proposals_ = propose_intervals(scores, self.quantile, self.L_min, self.L_max)
            full = False
        elif self.proposals == "dense":
            self.proposals_ = None
            full = True
        else:
            raise ValueError(f"unknown proposals {self.proposals!r}")
        if not full and not self.proposals_:
            self.anomalies_ = []
            return self
        self.anomalies_ = mdi_scan(
            emb, self.L_min, self.L_max, self.proposals_, self.top_k,
            full_scan=full, step=self.step, divergence=self.divergence,
            series_id=ts.series_id, channel=channel,
        )
        return self

"""Discord discovery on the left matrix profile.

Two routes compute the same profile: :func:`left_profile_brute` scans every
pair of windows, :func:`damp_detect` visits each window once and stops its
backward search as soon as the window provably cannot be the discord.
"""

import logging
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from sklearn.base import BaseEstimator

from ._validation import check_1d, check_scalar_int
from .core import ZNORM_EPS, AnomalyInterval, TimeSeries, znormalize

__all__ = [
    "LeftMatrixProfile",
    "znorm_distance",
    "left_profile_brute",
    "damp_detect",
    "extract_damp_anomalies",
    "merge_channel_intervals",
    "DAMP",
]

logger = logging.getLogger(__name__)

_BRUTE_BLOCK = 256


@dataclass(frozen=True, eq=False)
class LeftMatrixProfile:
    """Distance of every window to its nearest non-self match on its left.

    Attributes
    ----------
    values : ndarray, shape (n,)
        NaN before `split_index` and for the last ``m - 1`` positions.
    subsequence_length : int
    split_index : int
    exact : ndarray of bool
        True where the value is the exact nearest-neighbour distance.
        Elsewhere the value is an upper bound that was already below the
        best-so-far discord when the position was abandoned.
    pruned : ndarray of bool
        Positions skipped by the forward pass.
    prune_bound : ndarray
        Best-so-far discord distance at the moment a position was pruned,
        NaN for positions that were not pruned.
    """

    values: np.ndarray
    subsequence_length: int
    split_index: int
    exact: np.ndarray
    pruned: np.ndarray
    prune_bound: np.ndarray

    @property
    def valid(self):
        return ~np.isnan(self.values)

    @property
    def discord_index(self):
        v = np.where(self.valid, self.values, -np.inf)
        return int(np.argmax(v))

    @property
    def discord_value(self):
        return float(self.values[self.discord_index])


def _series_values(ts, name="ts"):
    if isinstance(ts, TimeSeries):
        if not ts.is_univariate:
            raise ValueError(f"{name} must be univariate, got {ts.d} channels")
        return ts.values[:, 0]
    return check_1d(ts, name)


def znorm_distance(a, b):
    """Euclidean distance between the z-normalized versions of `a` and `b`.

    Constant inputs normalize to the zero vector, so two constant inputs are
    at distance 0 and a constant vs. a non-constant one at ``sqrt(len)``.
    """
    a = check_1d(a, "a")
    b = check_1d(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[0] < 2:
        raise ValueError("z-normalized distance needs at least 2 points")
    return float(np.linalg.norm(znormalize(a) - znormalize(b)))


def _check_profile_args(x, m, t0):
    m = check_scalar_int(m, "m", min_val=2)
    t0 = check_scalar_int(t0, "t0", min_val=m)
    if x.shape[0] < t0 + m:
        raise ValueError(
            f"series of length {x.shape[0]} is too short for m={m}, t0={t0} "
            f"(need at least {t0 + m})"
        )
    return m, t0


def left_profile_brute(ts, m, t0):
    """Exact left matrix profile by exhaustive pairwise comparison.

    Every window is z-normalized on its own; all pairwise distances follow
    from the Gram matrix of the normalized windows, and the nearest
    neighbour's distance is then recomputed from the explicit difference.
    """
    x = _series_values(ts)
    m, t0 = _check_profile_args(x, m, t0)
    n = x.shape[0]
    n_win = n - m + 1
    Z = np.array([znormalize(x[j:j + m]) for j in range(n_win)])
    sq = np.einsum("ij,ij->i", Z, Z)

    values = np.full(n, np.nan)
    cand = np.arange(n_win)
    for lo in range(t0, n_win, _BRUTE_BLOCK):
        rows = np.arange(lo, min(lo + _BRUTE_BLOCK, n_win))
        hi = rows[-1] - m + 1
        d2 = sq[:hi, None] + sq[None, rows] - 2.0 * (Z[:hi] @ Z[rows].T)
        d2[cand[:hi, None] > rows[None, :] - m] = np.inf
        nearest = np.argmin(d2, axis=0)
        for r, j in zip(rows, nearest):
            values[r] = np.sqrt(np.sum((Z[r] - Z[j]) ** 2))
    exact = ~np.isnan(values)
    return LeftMatrixProfile(
        values=values,
        subsequence_length=m,
        split_index=t0,
        exact=exact,
        pruned=np.zeros(n, dtype=bool),
        prune_bound=np.full(n, np.nan),
    )


def _normalized_windows(x, m):
    win = sliding_window_view(x, m)
    mu = win.mean(axis=1)
    sd = win.std(axis=1)
    Z = np.zeros(win.shape)
    ok = sd > ZNORM_EPS
    Z[ok] = (win[ok] - mu[ok, None]) / sd[ok, None]
    return Z


def damp_detect(ts, m, t0, lookahead=0):
    """Left matrix profile with discord-driven pruning.

    The backward pass compares window ``i`` against a look-back block of
    ``m`` candidate windows ending ``m`` steps before it, doubling the block
    until either a match closer than the best-so-far discord is found (the
    window cannot be the discord, stop) or the whole prefix has been scanned
    (the value is exact and may raise the best-so-far).

    With ``lookahead > 0`` the forward pass compares window ``i`` with the
    next `lookahead` windows right of its exclusion zone; any of them closer
    than the best-so-far has a left-profile value below it and is skipped.

    The position and value of the maximum equal those of
    :func:`left_profile_brute`.
    """
    x = _series_values(ts)
    m, t0 = _check_profile_args(x, m, t0)
    lookahead = check_scalar_int(lookahead, "lookahead", min_val=0)
    n = x.shape[0]
    n_win = n - m + 1
    Z = _normalized_windows(x, m)
    sq = np.einsum("ij,ij->i", Z, Z)

    values = np.full(n, np.nan)
    exact = np.zeros(n, dtype=bool)
    pruned = np.zeros(n, dtype=bool)
    prune_bound = np.full(n, np.nan)
    forward_ub = np.full(n, np.inf)
    bsf = -np.inf

    for i in range(t0, n_win):
        if pruned[i]:
            values[i] = forward_ub[i]
            continue
        zi = Z[i]
        hi = i - m + 1  # candidates are [lo, hi)
        width = m
        lo = max(0, hi - width)
        best = np.inf
        scanned_lo = hi
        while True:
            block = slice(lo, scanned_lo)
            d2 = sq[block] + sq[i] - 2.0 * (Z[block] @ zi)
            j = lo + int(np.argmin(d2))
            dist = np.sqrt(np.sum((zi - Z[j]) ** 2))
            if dist < best:
                best = dist
            scanned_lo = lo
            if lo == 0:
                values[i] = best
                exact[i] = True
                if best > bsf:
                    bsf = best
                break
            if best < bsf:
                values[i] = best
                break
            width *= 2
            lo = max(0, hi - width)

        if lookahead:
            s = i + m
            e = min(s + lookahead, n_win)
            if s < e:
                d = np.sqrt(np.maximum(sq[s:e] + sq[i] - 2.0 * (Z[s:e] @ zi), 0.0))
                forward_ub[s:e] = np.minimum(forward_ub[s:e], d)
                hit = (d < bsf) & ~pruned[s:e]
                if hit.any():
                    idx = np.flatnonzero(hit) + s
                    pruned[idx] = True
                    prune_bound[idx] = bsf

    return LeftMatrixProfile(
        values=values,
        subsequence_length=m,
        split_index=t0,
        exact=exact,
        pruned=pruned,
        prune_bound=prune_bound,
    )


def extract_damp_anomalies(profile, k=None, threshold=0.98, *, series_id="series", channel=None):
    """Pick the top discords of a profile one at a time.

    After each pick the profile is suppressed within ``m`` positions of the
    chosen start, so emitted intervals never overlap. Extraction stops after
    `k` intervals or once the next maximum is no longer strictly above the
    `threshold` quantile of the valid profile values. ``threshold=None``
    disables the quantile stop.
    """
    if k is not None:
        k = check_scalar_int(k, "k", min_val=1)
    m = profile.subsequence_length
    valid = profile.valid
    if not valid.any():
        return []
    work = np.where(valid, profile.values, -np.inf)
    cutoff = -np.inf if threshold is None else float(np.quantile(profile.values[valid], threshold))
    out = []
    n = work.shape[0]
    while k is None or len(out) < k:
        i = int(np.argmax(work))
        v = work[i]
        if not np.isfinite(v) or (threshold is not None and v <= cutoff):
            break
        out.append(
            AnomalyInterval(
                start=i, end=i + m, score=float(v), detector="DAMP",
                channel=channel, series_id=series_id,
            )
        )
        work[max(0, i - m):min(n, i + m + 1)] = -np.inf
    return out


def merge_channel_intervals(anomalies, *, series_id=None, detector="DAMP"):
    """Union overlapping per-channel intervals into series-level intervals.

    The merged interval keeps the highest score and lists the contributing
    channels in ``source_channels``.
    """
    items = sorted(anomalies, key=lambda a: (a.start, a.end))
    merged = []
    for a in items:
        ch = (a.channel,) if a.channel is not None else a.source_channels
        if merged and a.start < merged[-1][1]:
            s, e, score, chans = merged[-1]
            merged[-1] = (s, max(e, a.end), max(score, a.score), chans | set(ch))
        else:
            merged.append((a.start, a.end, a.score, set(ch)))
    sid = series_id
    if sid is None:
        sid = items[0].series_id if items else "series"
    return [
        AnomalyInterval(s, e, score, detector, channel=None, series_id=sid,
                        source_channels=tuple(sorted(chans)))
        for s, e, score, chans in merged
    ]


class DAMP(BaseEstimator):
    """Discord detector on the left matrix profile.

    Parameters
    ----------
    m : int, default=288
        Subsequence length.
    t0 : int, default=2880
        Start of the region searched for discords; earlier data is only used
        as reference.
    lookahead : int, default=0
        Forward-pass pruning range, 0 disables it.
    n_anomalies : int or None, default=None
        Maximum number of discords per channel; None means unbounded.
    threshold : float or None, default=0.98
        Quantile of the profile a discord must exceed.

    Attributes
    ----------
    profiles_ : list of LeftMatrixProfile
        One per channel.
    anomalies_ : list of AnomalyInterval
        Per-channel discords, in channel order.
    discord_index_, discord_value_ : int, float
        Top discord of the first channel.
    """

    def __init__(self, m=288, t0=2880, lookahead=0, n_anomalies=None, threshold=0.98):
        self.m = m
        self.t0 = t0
        self.lookahead = lookahead
        self.n_anomalies = n_anomalies
        self.threshold = threshold

    def fit(self, X, y=None):
        if isinstance(X, TimeSeries):
            ts = X
        else:
            ts = TimeSeries.from_array(np.asarray(X, dtype=np.float64))
        self.profiles_ = []
        self.anomalies_ = []
        for c in range(ts.d):
            prof = damp_detect(ts.values[:, c], self.m, self.t0, self.lookahead)
            self.profiles_.append(prof)
            found = extract_damp_anomalies(
                prof, self.n_anomalies, self.threshold,
                series_id=ts.series_id, channel=c,
            )
            logger.debug("DAMP %s channel %d: %d discords", ts.series_id, c, len(found))
            self.anomalies_.extend(found)
        self.discord_index_ = self.profiles_[0].discord_index
        self.discord_value_ = self.profiles_[0].discord_value
        return self

    def merged_anomalies(self):
        """Series-level intervals from the union of all channels' discords."""
        return merge_channel_intervals(self.anomalies_)

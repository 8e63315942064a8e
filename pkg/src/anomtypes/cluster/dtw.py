"""Dynamic time warping and DTW barycenter averaging."""

import numpy as np
from numba import njit

__all__ = ["dtw_distance", "dtw_path", "dtw_pairwise", "dtw_to_many", "dba"]


def _as_2d(x, name):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty 1-D or 2-D sequence")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return np.ascontiguousarray(arr)


@njit(cache=True)
def _window(i, n, m, band):
    if band < 0:
        return 1, m
    w = max(band, abs(n - m))
    return max(1, i - w), min(m, i + w)


@njit(cache=True)
def _cost(a, b, band):
    n, m = a.shape[0], b.shape[0]
    d = a.shape[1]
    prev = np.full(m + 1, np.inf)
    curr = np.full(m + 1, np.inf)
    prev[0] = 0.0
    for i in range(1, n + 1):
        curr[:] = np.inf
        lo, hi = _window(i, n, m, band)
        for j in range(lo, hi + 1):
            c = 0.0
            for k in range(d):
                diff = a[i - 1, k] - b[j - 1, k]
                c += diff * diff
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if curr[j - 1] < best:
                best = curr[j - 1]
            curr[j] = c + best
        prev, curr = curr, prev
    return prev[m]


@njit(cache=True)
def _accumulated(a, b, band):
    n, m = a.shape[0], b.shape[0]
    d = a.shape[1]
    D = np.full((n + 1, m + 1), np.inf)
    D[0, 0] = 0.0
    for i in range(1, n + 1):
        lo, hi = _window(i, n, m, band)
        for j in range(lo, hi + 1):
            c = 0.0
            for k in range(d):
                diff = a[i - 1, k] - b[j - 1, k]
                c += diff * diff
            best = D[i - 1, j - 1]
            if D[i - 1, j] < best:
                best = D[i - 1, j]
            if D[i, j - 1] < best:
                best = D[i, j - 1]
            D[i, j] = c + best
    return D


@njit(cache=True)
def _backtrack(D):
    i, j = D.shape[0] - 1, D.shape[1] - 1
    path = np.empty((i + j, 2), dtype=np.int64)
    p = 0
    while True:
        path[p, 0] = i - 1
        path[p, 1] = j - 1
        p += 1
        if i == 1 and j == 1:
            break
        diag, up, left = D[i - 1, j - 1], D[i - 1, j], D[i, j - 1]
        if diag <= up and diag <= left:
            i -= 1
            j -= 1
        elif up <= left:
            i -= 1
        else:
            j -= 1
    return path[:p][::-1]


@njit(cache=True)
def _to_many(x, flat, offsets, band):
    out = np.empty(offsets.shape[0] - 1)
    for r in range(out.shape[0]):
        out[r] = _cost(x, flat[offsets[r]:offsets[r + 1]], band)
    return out


@njit(cache=True)
def _dba_step(avg, flat, offsets, band):
    sums = np.zeros_like(avg)
    counts = np.zeros(avg.shape[0])
    for r in range(offsets.shape[0] - 1):
        s = flat[offsets[r]:offsets[r + 1]]
        path = _backtrack(_accumulated(avg, s, band))
        for p in range(path.shape[0]):
            sums[path[p, 0]] += s[path[p, 1]]
            counts[path[p, 0]] += 1.0
    for i in range(avg.shape[0]):
        sums[i] /= counts[i]
    return sums


def _stack(seqs):
    seqs = [_as_2d(s, "sequence") for s in seqs]
    offsets = np.zeros(len(seqs) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([s.shape[0] for s in seqs])
    return np.ascontiguousarray(np.concatenate(seqs, axis=0)), offsets


def _band(band):
    return -1 if band is None else int(band)


def dtw_distance(a, b, band=None):
    """DTW with squared pointwise cost; the square root of the total is returned.

    Parameters
    ----------
    a, b : array-like, 1-D or ``(length, d)``
    band : int or None
        Sakoe-Chiba half-width; widened to the length difference when needed.
        None (default) uses the full matrix.
    """
    a = _as_2d(a, "a")
    b = _as_2d(b, "b")
    if a.shape[1] != b.shape[1]:
        raise ValueError("sequences must have the same number of channels")
    return float(np.sqrt(_cost(a, b, _band(band))))


def dtw_path(a, b, band=None):
    """Optimal warping path as ``(k, 2)`` index pairs and the DTW distance."""
    a = _as_2d(a, "a")
    b = _as_2d(b, "b")
    D = _accumulated(a, b, _band(band))
    return _backtrack(D), float(np.sqrt(D[-1, -1]))


def dtw_to_many(x, seqs, band=None):
    """Squared DTW cost from `x` to each sequence in `seqs`."""
    flat, offsets = seqs if isinstance(seqs, tuple) else _stack(seqs)
    return _to_many(_as_2d(x, "x"), flat, offsets, _band(band))


def dtw_pairwise(seqs, band=None):
    """Symmetric matrix of DTW distances (not squared)."""
    seqs = [_as_2d(s, "sequence") for s in seqs]
    n = len(seqs)
    flat, offsets = _stack(seqs)
    D = np.zeros((n, n))
    for i in range(n - 1):
        sub = (flat[offsets[i + 1]:], offsets[i + 1:] - offsets[i + 1])
        row = np.sqrt(_to_many(seqs[i], sub[0], sub[1], _band(band)))
        D[i, i + 1:] = row
        D[i + 1:, i] = row
    return D


def dba(seqs, init, max_iter=10, band=None):
    """DTW barycenter averaging started from `init`.

    Each iteration aligns every sequence to the current average and replaces
    each average point by the mean of the points aligned to it. An update is
    kept only if the summed squared DTW cost does not increase, so the
    returned cost never exceeds that of `init`.

    Returns
    -------
    average : ndarray of shape ``init.shape`` (2-D)
    cost : float
        Sum of squared DTW distances from the average to the sequences.
    """
    stacked = _stack(seqs)
    avg = _as_2d(init, "init").copy()
    bnd = _band(band)
    cost = float(np.sum(_to_many(avg, stacked[0], stacked[1], bnd)))
    for _ in range(max_iter):
        new = _dba_step(avg, stacked[0], stacked[1], bnd)
        new_cost = float(np.sum(_to_many(new, stacked[0], stacked[1], bnd)))
        if new_cost > cost:
            break
        gain = cost - new_cost
        avg, cost = new, new_cost
        if gain <= 1e-12 * max(cost, 1e-300):
            break
    return avg, cost

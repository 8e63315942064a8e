"""Canonical time-series characteristics (the catch22 set) in numpy.

Each feature takes a z-scored vector (sample standard deviation) and returns
a float. The formulas follow the reference C implementation closely enough
that the values agree with it to floating-point round-off on typical inputs;
``tests/test_features_catch22.py`` checks this against ``pycatch22`` when it
is installed.

Degenerate input (constant vectors) yields 0 in every slot instead of NaN.
"""

import logging
import math

import numpy as np
from scipy.interpolate import make_lsq_spline

logger = logging.getLogger(__name__)

# the reference implementation uses this truncated constant in the Welch summaries
_PI = 3.14159265359


def _nextpow2(n):
    return 1 << max(0, int(n - 1).bit_length())


def zscore_sample(y):
    """Z-score with the n-1 standard deviation; None when undefined."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape[0] < 2:
        return None
    sd = y.std(ddof=1)
    if not np.isfinite(sd) or sd == 0.0 or np.all(y == y[0]):
        return None
    return (y - y.mean()) / sd


# -- shared helpers --------------------------------------------------------

def autocorrs(y):
    """Autocorrelation at lags 0..2N-1 via zero-padded FFT, normalized by lag 0."""
    n = y.shape[0]
    nfft = _nextpow2(n) << 1
    F = np.fft.fft(y - y.mean(), nfft)
    ac = np.fft.fft(F * np.conj(F)).real
    return ac / ac[0]


def firstzero(y, maxtau=None, ac=None):
    n = y.shape[0]
    maxtau = n if maxtau is None else maxtau
    ac = autocorrs(y) if ac is None else ac
    below = np.flatnonzero(~(ac[:maxtau] > 0))
    return int(below[0]) if below.size else maxtau


def autocorr_lag(y, lag):
    a = y[:-lag] - y[:-lag].mean()
    b = y[lag:] - y[lag:].mean()
    return float(np.sum(a * b) / math.sqrt(np.sum(a * a) * np.sum(b * b)))


def _quantile(y, q):
    s = np.sort(y)
    n = s.shape[0]
    lo_q = 0.5 / n
    if q < lo_q:
        return s[0]
    if q > 1 - lo_q:
        return s[-1]
    idx = n * q - 0.5
    left, right = math.floor(idx), math.ceil(idx)
    if left == right:
        return s[left]
    return s[left] + (idx - left) * (s[right] - s[left]) / (right - left)


def coarsegrain_quantile(y, groups):
    """Label values 1..groups by quantile bins."""
    ls = np.empty(groups + 1)
    acc = 0.0
    step = 1.0 / groups
    for i in range(groups + 1):  # accumulated like the reference linspace
        ls[i] = acc
        acc += step
    th = np.array([_quantile(y, q) for q in ls])
    th[0] -= 1
    labels = np.zeros(y.shape[0], dtype=np.int64)
    for i in range(groups):
        labels[(y > th[i]) & (y <= th[i + 1])] = i + 1
    return labels


def _histcounts(y, n_bins):
    lo, hi = y.min(), y.max()
    step = (hi - lo) / n_bins
    idx = ((y - lo) / step).astype(np.int64)
    idx = np.clip(idx, 0, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    edges = np.arange(n_bins + 1) * step + lo
    return counts, edges


def _linreg(x, y):
    n = x.shape[0]
    sx, sx2, sxy, sy = x.sum(), (x * x).sum(), (x * y).sum(), y.sum()
    denom = n * sx2 - sx * sx
    if denom == 0:
        return 0.0, 0.0
    return (n * sxy - sx * sy) / denom, (sy * sx2 - sx * sxy) / denom


def _entropy(p):
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


# -- the 22 features -------------------------------------------------------

def _histogram_mode(y, n_bins):
    counts, edges = _histcounts(y, n_bins)
    centers = (edges[:-1] + edges[1:]) * 0.5
    return float(centers[counts == counts.max()].mean())


def DN_HistogramMode_5(y):
    return _histogram_mode(y, 5)


def DN_HistogramMode_10(y):
    return _histogram_mode(y, 10)


def CO_f1ecac(y):
    ac = autocorrs(y)
    thresh = 1.0 / math.exp(1)
    n = y.shape[0]
    for i in range(n - 2):
        if ac[i + 1] < thresh:
            return float(i + (thresh - ac[i]) / (ac[i + 1] - ac[i]))
    return float(n)


def CO_FirstMin_ac(y):
    ac = autocorrs(y)
    n = y.shape[0]
    for i in range(1, n - 1):
        if ac[i] < ac[i - 1] and ac[i] < ac[i + 1]:
            return float(i)
    return float(n)


def CO_HistogramAMI_even_2_5(y):
    tau, n_bins = 2, 5
    lo, hi = y.min(), y.max()
    step = (hi - lo + 0.2) / n_bins
    edges = lo + step * np.arange(n_bins + 1) - 0.1
    b1 = np.searchsorted(edges, y[:-tau], side="right")
    b2 = np.searchsorted(edges, y[tau:], side="right")
    ok = (b1 >= 1) & (b1 <= n_bins) & (b2 >= 1) & (b2 <= n_bins)
    joint = np.zeros((n_bins, n_bins))
    np.add.at(joint, (b1[ok] - 1, b2[ok] - 1), 1.0)
    joint /= joint.sum()
    pi = joint.sum(axis=1)
    pj = joint.sum(axis=0)
    nz = joint > 0
    return float(np.sum(joint[nz] * np.log(joint[nz] / np.outer(pi, pj)[nz])))


def CO_trev_1_num(y):
    return float(np.mean(np.diff(y) ** 3))


def MD_hrv_classic_pnn40(y):
    return float(np.mean(np.abs(np.diff(y)) * 1000 > 40))


def _longest_stretch(flags):
    # stretch lengths between consecutive "breaking" positions, as measured
    # by the reference loop (the last position always closes a stretch)
    n = flags.shape[0]
    best, last = 0, 0
    for i in np.flatnonzero(flags | (np.arange(n) == n - 1)):
        best = max(best, i - last)
        last = i
    return float(best)


def SB_BinaryStats_mean_longstretch1(y):
    above = (y[:-1] - y.mean()) > 0
    return _longest_stretch(~above)


def SB_BinaryStats_diff_longstretch0(y):
    rising = np.diff(y) >= 0
    return _longest_stretch(rising)


def SB_TransitionMatrix_3ac_sumdiagcov(y):
    n = y.shape[0]
    tau = firstzero(y)
    down = y[::tau][: (n - 1) // tau + 1]
    labels = coarsegrain_quantile(down, 3) - 1
    T = np.zeros((3, 3))
    np.add.at(T, (labels[:-1], labels[1:]), 1.0)
    T /= down.shape[0] - 1
    return float(np.sum(T.var(axis=0, ddof=1)))


def _spline_trend(y):
    # least-squares cubic spline with one interior break at floor(n/2)-1
    n = y.shape[0]
    x = np.arange(n, dtype=np.float64)
    b = n // 2 - 1
    t = np.r_[[0.0] * 4, [float(b)], [n - 1.0] * 4]
    try:
        return make_lsq_spline(x, y, t, k=3)(x)
    except (ValueError, np.linalg.LinAlgError):
        return np.polyval(np.polyfit(x, y, min(3, n - 1)), x)


def PD_PeriodicityWang_th0_01(y):
    th = 0.01
    n = y.shape[0]
    r = y - _spline_trend(y)
    acmax = math.ceil(n / 3)
    lags = np.arange(1, acmax + 1)
    full = np.correlate(r, r, mode="full")[n:n + acmax]
    acf = full / (n - lags)
    trough = None
    for i in range(1, acmax - 1):
        s_in = acf[i] - acf[i - 1]
        s_out = acf[i + 1] - acf[i]
        if s_in < 0 and s_out > 0:
            trough = i
        elif s_in > 0 and s_out < 0:
            if trough is None:
                continue
            if acf[i] - acf[trough] < th or acf[i] < 0:
                continue
            return float(i)
    return 0.0


def CO_Embed2_Dist_tau_d_expfit_meandiff(y):
    n = y.shape[0]
    tau = firstzero(y)
    if tau > n / 10:
        tau = n // 10
    dy = np.diff(y)
    m = n - tau - 1
    d = np.sqrt(dy[:m] ** 2 + dy[tau:tau + m] ** 2)
    ell = d.mean()
    sd = d.std(ddof=1) if m > 1 else 0.0
    if not sd >= 0.001:
        return 0.0
    n_bins = int(math.ceil((d.max() - d.min()) / (3.5 * sd / m ** (1 / 3.0))))
    counts, edges = _histcounts(d, n_bins)
    p = counts / m
    expf = np.maximum(np.exp(-(edges[:-1] + edges[1:]) * 0.5 / ell) / ell, 0.0)
    return float(np.mean(np.abs(p - expf)))


def IN_AutoMutualInfoStats_40_gaussian_fmmi(y):
    n = y.shape[0]
    tau = min(40, (n + 1) // 2)
    if tau < 3:
        return float(tau)

    def ami(lag):
        ac = autocorr_lag(y, lag)
        return -0.5 * math.log(1.0 - ac * ac)

    prev, curr = ami(1), ami(2)
    for i in range(1, tau - 1):
        nxt = ami(i + 2)
        if curr < prev and curr < nxt:
            return float(i)
        prev, curr = curr, nxt
    return float(tau)


def _mean_forecast_residuals(y, train):
    csum = np.concatenate(([0.0], np.cumsum(y)))
    n = y.shape[0] - train
    return y[train:] - (csum[train:train + n] - csum[:n]) / train


def FC_LocalSimple_mean1_tauresrat(y):
    res = y[1:] - y[:-1]
    return float(firstzero(res) / firstzero(y))


def FC_LocalSimple_mean3_stderr(y):
    res = _mean_forecast_residuals(y, 3)
    return float(res.std(ddof=1))


def _outlier_include(y, sign):
    inc = 0.01
    n = y.shape[0]
    w = sign * y
    tot = int(np.sum(w >= 0))
    vmax = w.max()
    if vmax < inc:
        return 0.0
    n_thresh = int(vmax / inc + 1)
    thresholds = np.arange(n_thresh) * inc
    counts = np.array([np.count_nonzero(w >= t) for t in thresholds])
    above = np.flatnonzero((counts - 1) * 100.0 / tot > 2)
    mj = int(above[-1]) if above.size else 0
    single = np.flatnonzero(counts - 1 == 0)
    fbi = int(single[0]) if single.size else n_thresh - 1
    trim = min(mj, fbi)
    pos = np.arange(1, n + 1, dtype=np.float64)
    med = np.array([np.median(pos[w >= thresholds[j]]) for j in range(trim + 1)])
    return float(np.median(med / (n / 2.0) - 1))


def DN_OutlierInclude_p_001_mdrmd(y):
    return _outlier_include(y, 1.0)


def DN_OutlierInclude_n_001_mdrmd(y):
    return _outlier_include(y, -1.0)


def _welch_rect(y):
    n = y.shape[0]
    nfft = _nextpow2(n)
    F = np.fft.fft(y - y.mean(), nfft)
    P = np.abs(F) ** 2 / n
    n_out = nfft // 2 + 1
    S = P[:n_out].copy()
    S[1:n_out - 1] *= 2
    w = 2 * _PI * np.arange(n_out) / nfft
    return w, S / (2 * _PI)


def SP_Summaries_welch_rect_area_5_1(y):
    w, S = _welch_rect(y)
    return float(np.sum(S[: S.shape[0] // 5]) * (w[1] - w[0]))


def SP_Summaries_welch_rect_centroid(y):
    w, S = _welch_rect(y)
    cs = np.cumsum(S)
    hit = np.flatnonzero(cs > cs[-1] * 0.5)
    return float(w[hit[0]]) if hit.size else 0.0


def SB_MotifThree_quantile_hh(y):
    labels = coarsegrain_quantile(y, 3) - 1
    pairs = np.zeros((3, 3))
    np.add.at(pairs, (labels[:-1], labels[1:]), 1.0)
    return _entropy(pairs.ravel() / (y.shape[0] - 1))


def _fluct_scales(n):
    lo, hi = math.log(5), math.log(n // 2)
    step = (hi - lo) / 49
    taus = [math.floor(math.exp(lo + i * step) + 0.5) for i in range(50)]
    return np.unique(np.array(taus, dtype=np.int64))


def _fluct_anal(y, lag, how):
    n = y.shape[0]
    if n // 2 < 1:
        return 0.0
    taus = _fluct_scales(n)
    if taus.shape[0] < 12:
        return 0.0
    ycs = np.cumsum(y[::lag][: n // lag])
    F = np.empty(taus.shape[0])
    for k, t in enumerate(taus):
        nbuf = ycs.shape[0] // t
        x = np.arange(1, t + 1, dtype=np.float64)
        sx, sx2 = x.sum(), (x * x).sum()
        denom = t * sx2 - sx * sx
        W = ycs[: nbuf * t].reshape(nbuf, t)
        sy = W.sum(axis=1)
        sxy = W @ x
        if denom == 0:
            slope = intercept = np.zeros(nbuf)
        else:
            slope = (t * sxy - sx * sy) / denom
            intercept = (sy * sx2 - sx * sxy) / denom
        R = W - (slope[:, None] * x[None, :] + intercept[:, None])
        if how == "dfa":
            F[k] = math.sqrt(np.sum(R * R) / (nbuf * t))
        else:
            rng = R.max(axis=1) - R.min(axis=1)
            F[k] = math.sqrt(np.sum(rng * rng) / nbuf)
    with np.errstate(divide="ignore"):
        lt, lf = np.log(taus.astype(np.float64)), np.log(F)
    ntt = taus.shape[0]
    min_pts = 6
    sserr = np.empty(ntt - 2 * min_pts + 1)
    for i in range(min_pts, ntt - min_pts + 1):
        m1, b1 = _linreg(lt[:i], lf[:i])
        m2, b2 = _linreg(lt[i - 1:], lf[i - 1:])
        e1 = lt[:i] * m1 + b1 - lf[:i]
        e2 = lt[i - 1:] * m2 + b2 - lf[i - 1:]
        sserr[i - min_pts] = math.sqrt(np.sum(e1 * e1)) + math.sqrt(np.sum(e2 * e2))
    first = int(np.flatnonzero(sserr == sserr.min())[0]) + min_pts - 1
    return float((first + 1) / ntt)


def SC_FluctAnal_2_rsrangefit_50_1_logi_prop_r1(y):
    return _fluct_anal(y, 1, "rsrangefit")


def SC_FluctAnal_2_dfa_50_1_2_logi_prop_r1(y):
    return _fluct_anal(y, 2, "dfa")


# -- additional characteristics ------------------------------------------

def AC_lag1(y):
    """Pearson correlation between the series and itself shifted by one."""
    return autocorr_lag(y, 1)


def DN_QuantileSpread_IQR(y):
    """Interquartile range of the values."""
    q75, q25 = np.quantile(y, [0.75, 0.25])
    return float(q75 - q25)


def MD_MeanAbsDiff(y):
    """Mean absolute successive difference."""
    return float(np.mean(np.abs(np.diff(y))))


def _dfa_fluctuation(profile, s):
    nbuf = profile.shape[0] // s
    W = profile[: nbuf * s].reshape(nbuf, s)
    x = np.arange(s, dtype=np.float64)
    xc = x - x.mean()
    slope = (W @ xc) / (xc @ xc)
    R = W - W.mean(axis=1, keepdims=True) - slope[:, None] * xc[None, :]
    return math.sqrt(np.mean(R * R))


def SC_DFA_slope_2win(y):
    """Detrended-fluctuation slope between window sizes 4 and max(8, n/4).

    The slope of ``log F(s)`` against ``log s`` through the two points.
    """
    n = y.shape[0]
    profile = np.cumsum(y - y.mean())
    s1 = 4
    s2 = min(n, max(8, n // 4))
    f1, f2 = _dfa_fluctuation(profile, s1), _dfa_fluctuation(profile, s2)
    if f1 <= 0 or f2 <= 0:
        return 0.0
    return float((math.log(f2) - math.log(f1)) / (math.log(s2) - math.log(s1)))


CATCH22_NAMES = (
    "DN_HistogramMode_5",
    "DN_HistogramMode_10",
    "CO_f1ecac",
    "CO_FirstMin_ac",
    "CO_HistogramAMI_even_2_5",
    "CO_trev_1_num",
    "MD_hrv_classic_pnn40",
    "SB_BinaryStats_mean_longstretch1",
    "SB_TransitionMatrix_3ac_sumdiagcov",
    "PD_PeriodicityWang_th0_01",
    "CO_Embed2_Dist_tau_d_expfit_meandiff",
    "IN_AutoMutualInfoStats_40_gaussian_fmmi",
    "FC_LocalSimple_mean1_tauresrat",
    "DN_OutlierInclude_p_001_mdrmd",
    "DN_OutlierInclude_n_001_mdrmd",
    "SP_Summaries_welch_rect_area_5_1",
    "SB_BinaryStats_diff_longstretch0",
    "SB_MotifThree_quantile_hh",
    "SC_FluctAnal_2_rsrangefit_50_1_logi_prop_r1",
    "SC_FluctAnal_2_dfa_50_1_2_logi_prop_r1",
    "SP_Summaries_welch_rect_centroid",
    "FC_LocalSimple_mean3_stderr",
)

EXTRA_NAMES = ("AC_lag1", "DN_QuantileSpread_IQR", "MD_MeanAbsDiff", "SC_DFA_slope_2win")

FEATURES = {name: globals()[name] for name in CATCH22_NAMES + EXTRA_NAMES}

# one feature per category: distribution, temporal, linear and non-linear
# autocorrelation, successive differences, fluctuation
MINIMAL_NAMES = (
    "DN_QuantileSpread_IQR",
    "SB_BinaryStats_mean_longstretch1",
    "AC_lag1",
    "CO_FirstZero_ac",
    "CO_trev_1_num",
    "MD_MeanAbsDiff",
    "SC_DFA_slope_2win",
)


def CO_FirstZero_ac(y):
    """First lag at which the autocorrelation is no longer positive."""
    return float(firstzero(y))


FEATURES["CO_FirstZero_ac"] = CO_FirstZero_ac

REGISTRIES = {
    "catch22": CATCH22_NAMES,
    "extended": CATCH22_NAMES + EXTRA_NAMES + ("CO_FirstZero_ac",),
    "minimal": MINIMAL_NAMES,
}


def register_feature(name, func, registry=None):
    """Add a feature function; optionally append it to a named registry."""
    FEATURES[name] = func
    if registry is not None:
        REGISTRIES[registry] = tuple(REGISTRIES.get(registry, ())) + (name,)


def resolve_registry(registry):
    if isinstance(registry, str):
        try:
            names = REGISTRIES[registry]
        except KeyError:
            raise ValueError(
                f"unknown feature registry {registry!r}; known: {sorted(REGISTRIES)}"
            ) from None
    else:
        names = tuple(registry)
    missing = [n for n in names if n not in FEATURES]
    if missing:
        raise ValueError(f"unknown features: {missing}")
    return names


def catch22_vector(x, registry="catch22"):
    """Feature vector of one univariate sequence.

    Constant input gives 0 everywhere; a slot whose formula is undefined on
    the given input (for instance a perfectly periodic sequence with an
    autocorrelation of exactly one) is also set to 0.
    """
    names = resolve_registry(registry)
    y = zscore_sample(np.asarray(x, dtype=np.float64).ravel())
    out = np.zeros(len(names))
    if y is None:
        return out
    for k, name in enumerate(names):
        with np.errstate(all="ignore"):
            try:
                v = FEATURES[name](y)
            except (ValueError, ZeroDivisionError, FloatingPointError) as exc:
                logger.debug("feature %s undefined: %s", name, exc)
                v = 0.0
        out[k] = v if np.isfinite(v) else 0.0
    return out

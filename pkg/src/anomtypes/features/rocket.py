"""Random convolutional kernels and the max / PPV pooling they produce."""

import hashlib
import logging
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .._validation import check_scalar_int

__all__ = [
    "RandomKernel",
    "generate_kernels",
    "kernel_hash",
    "apply_kernels",
    "pca_fit",
]

logger = logging.getLogger(__name__)

KERNEL_LENGTHS = (7, 9, 11)


@dataclass(frozen=True, eq=False)
class RandomKernel:
    """One dilated convolution kernel.

    With ``padding=True`` the input is zero-padded by ``(length-1)*dilation//2``
    on each side, so the output is as long as the input.
    """

    length: int
    weights: np.ndarray
    bias: float
    dilation: int
    padding: bool

    def __post_init__(self):
        if self.length % 2 != 1:
            raise ValueError("kernel length must be odd")
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (self.length,):
            raise ValueError("weights must have one entry per kernel position")
        if self.dilation < 1:
            raise ValueError("dilation must be >= 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)


def generate_kernels(count, seed, max_input_length):
    """Draw `count` kernels deterministically from `seed`.

    Lengths are uniform over {7, 9, 11}, weights standard normal, biases
    uniform on (-1, 1), dilation ``2**x`` with integer ``x`` uniform on
    ``[0, floor(log2((max_input_length - 1) / (length - 1)))]``, and padding
    is switched on with probability 1/2.
    """
    count = check_scalar_int(count, "count", min_val=1)
    max_input_length = check_scalar_int(max_input_length, "max_input_length")
    if max_input_length < 7:
        raise ValueError(f"max_input_length must be >= 7, got {max_input_length}")
    rng = np.random.default_rng(seed)
    kernels = []
    for _ in range(count):
        length = int(rng.choice(KERNEL_LENGTHS))
        weights = rng.normal(0.0, 1.0, length)
        bias = float(rng.uniform(-1.0, 1.0))
        x_max = max(0, int(math.floor(math.log2((max_input_length - 1) / (length - 1)))))
        dilation = 2 ** int(rng.integers(0, x_max, endpoint=True))
        padding = bool(rng.integers(0, 2))
        kernels.append(RandomKernel(length, weights, bias, dilation, padding))
    return kernels


def kernel_hash(kernels):
    """SHA-256 over the exact kernel parameters."""
    h = hashlib.sha256()
    for k in kernels:
        h.update(np.array([k.length, k.dilation, int(k.padding)], dtype=np.int64).tobytes())
        h.update(np.array([k.bias], dtype=np.float64).tobytes())
        h.update(k.weights.tobytes())
    return h.hexdigest()


def _pack(kernels):
    lengths = np.array([k.length for k in kernels], dtype=np.int64)
    weights = np.concatenate([k.weights for k in kernels])
    biases = np.array([k.bias for k in kernels], dtype=np.float64)
    dilations = np.array([k.dilation for k in kernels], dtype=np.int64)
    padding = np.array([k.padding for k in kernels], dtype=np.bool_)
    return weights, lengths, biases, dilations, padding


@njit(cache=True)
def _apply_one(x, weights, lengths, biases, dilations, padding, out):
    n = x.shape[0]
    a = 0
    for k in range(lengths.shape[0]):
        length = lengths[k]
        dil = dilations[k]
        span = (length - 1) * dil
        # an unpadded kernel longer than the input falls back to padding
        pad = span // 2 if (padding[k] or span >= n) else 0
        out_len = n + 2 * pad - span
        mx = -np.inf
        ppv = 0
        for i in range(-pad, n + pad - span):
            s = biases[k]
            idx = i
            for j in range(length):
                if idx >= 0 and idx < n:
                    s += weights[a + j] * x[idx]
                idx += dil
            if s > mx:
                mx = s
            if s > 0:
                ppv += 1
        out[2 * k] = mx
        out[2 * k + 1] = ppv / out_len
        a += length


def apply_kernels(x, kernels, packed=None):
    """``[max, PPV]`` for every kernel applied to the 1-D sequence `x`."""
    packed = _pack(kernels) if packed is None else packed
    x = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty(2 * packed[1].shape[0])
    _apply_one(x, *packed, out)
    return out


def pca_fit(Z, n_components, rel_tol=1e-12):
    """Principal axes of the centered rows of `Z`.

    Components are ordered by decreasing variance and signed so that each
    one's largest-magnitude loading is positive. Axes whose variance is
    negligible (rank deficiency when there are fewer rows than columns) are
    returned as zero vectors so they project to constant columns.

    Returns
    -------
    mean : ndarray of shape (p,)
    components : ndarray of shape (n_components, p)
    variances : ndarray of shape (n_components,)
    """
    Z = np.asarray(Z, dtype=np.float64)
    n, p = Z.shape
    mean = Z.mean(axis=0)
    C = Z - mean
    # the right singular vectors are the eigenvectors of the sample covariance
    _, s, Vt = np.linalg.svd(C, full_matrices=False)
    var = s ** 2 / max(n - 1, 1)
    comps = np.zeros((n_components, p))
    variances = np.zeros(n_components)
    top = var[0] if var.size else 0.0
    for i in range(min(n_components, Vt.shape[0])):
        if var[i] <= rel_tol * top or top == 0.0:
            continue
        v = Vt[i]
        j = int(np.argmax(np.abs(v)))
        comps[i] = v if v[j] > 0 else -v
        variances[i] = var[i]
    return mean, comps, variances

"""Series-level fidelity and coherence measures."""

from __future__ import annotations

import numba
import numpy as np

from ..errors import CtsError, ShapeError


def _as_2d(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ShapeError(f"series must be (T,) or (T, d_r), got {x.shape}")
    return x


def ed(x, y):
    """Frobenius distance between two equally shaped series."""
    x, y = _as_2d(x), _as_2d(y)
    if x.shape != y.shape:
        raise ShapeError(f"ED needs equal shapes, got {x.shape} and {y.shape}")
    return float(np.sqrt(np.sum((x - y) ** 2)))


@numba.njit(cache=True)
def _dtw_cost(x, y):
    n, m = x.shape[0], y.shape[0]
    D = np.full((n + 1, m + 1), np.inf)
    D[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            c = 0.0
            for k in range(x.shape[1]):
                d = x[i - 1, k] - y[j - 1, k]
                c += d * d
            best = D[i - 1, j - 1]
            if D[i - 1, j] < best:
                best = D[i - 1, j]
            if D[i, j - 1] < best:
                best = D[i, j - 1]
            D[i, j] = c + best
    return D[n, m]


def dtw(x, y):
    """Unconstrained DTW with squared-Euclidean frame cost; returns sqrt of the total."""
    x, y = _as_2d(x), _as_2d(y)
    if len(x) == 0 or len(y) == 0:
        raise CtsError("DTW needs non-empty series")
    if x.shape[1] != y.shape[1]:
        raise ShapeError(f"DTW needs equal channel counts, got {x.shape[1]} and {y.shape[1]}")
    return float(np.sqrt(_dtw_cost(np.ascontiguousarray(x), np.ascontiguousarray(y))))


def autocorrelation(x, max_lag):
    """Sample autocorrelation per channel for lags 1..max_lag -> (max_lag, d_r).

    Constant channels have rho = 0 at every lag.
    """
    x = _as_2d(x)
    xc = x - x.mean(axis=0)
    var = np.sum(xc * xc, axis=0)
    T = len(x)
    out = np.zeros((max_lag, x.shape[1]))
    for lag in range(1, max_lag + 1):
        cov = np.sum(xc[lag:] * xc[:T - lag], axis=0)
        out[lag - 1] = np.divide(cov, var, out=np.zeros_like(cov), where=var > 0)
    return out


def default_max_lag(T):
    return max(1, min(T // 2, 20))


def acd(x, y, max_lag=None):
    """Mean |rho_x(l) - rho_y(l)| over channels and lags 1..max_lag."""
    x, y = _as_2d(x), _as_2d(y)
    if x.shape != y.shape:
        raise ShapeError(f"ACD needs equal shapes, got {x.shape} and {y.shape}")
    if max_lag is None:
        max_lag = default_max_lag(len(x))
    if not 1 <= max_lag < len(x):
        raise CtsError(f"max_lag must be in [1, T) (T={len(x)}), got {max_lag}")
    return float(np.mean(np.abs(autocorrelation(x, max_lag) - autocorrelation(y, max_lag))))


def _psd_sqrt(C):
    w, V = np.linalg.eigh(C)
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def frechet_gaussian(m1, C1, m2, C2):
    """||m1 - m2||^2 + tr(C1 + C2 - 2 (C1 C2)^{1/2}) for PSD covariances."""
    s1 = _psd_sqrt(C1)
    inner = s1 @ C2 @ s1
    inner = 0.5 * (inner + inner.T)
    tr_sqrt = np.sum(np.sqrt(np.clip(np.linalg.eigvalsh(inner), 0.0, None)))
    diff = m1 - m2
    return float(max(diff @ diff + np.trace(C1) + np.trace(C2) - 2.0 * tr_sqrt, 0.0))


def cfid(real_embeddings, gen_embeddings, shrinkage=1e-6):
    """Frechet distance between Gaussian fits of two embedded sets.

    Inputs are already embedded (n, d) arrays; see
    :func:`ctsgen.pipeline.embed` for the VAE-mean embedder.
    """
    a = np.asarray(real_embeddings, dtype=np.float64)
    b = np.asarray(gen_embeddings, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    if len(a) < 2 or len(b) < 2:
        raise CtsError("C-FID needs at least two embedded series per set")
    if a.shape[1] != b.shape[1]:
        raise ShapeError("embedding dimensions differ")
    eye = shrinkage * np.eye(a.shape[1])
    C1 = np.atleast_2d(np.cov(a, rowvar=False)) + eye
    C2 = np.atleast_2d(np.cov(b, rowvar=False)) + eye
    return frechet_gaussian(a.mean(axis=0), C1, b.mean(axis=0), C2)

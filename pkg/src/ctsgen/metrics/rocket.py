"""Random convolutional kernel features + ridge one-vs-rest classifier.

Kernels: length in {7, 9, 11}; mean-centred standard-normal weights spanning
all channels; bias ~ U(-1, 1); dilation floor(2^u) with u uniform over the
admissible exponent range; zero padding on half the kernels. Each kernel
contributes two features: the proportion of positive outputs and the max.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from ..errors import CtsError

KERNEL_LENGTHS = (7, 9, 11)
RIDGE_GRID = (0.01, 0.1, 1.0, 10.0)


@dataclass
class KernelBank:
    lengths: np.ndarray
    weights: np.ndarray  # concatenated (d_r * length) blocks, channel-major
    offsets: np.ndarray
    biases: np.ndarray
    dilations: np.ndarray
    paddings: np.ndarray
    channels: int

    def __len__(self):
        return len(self.lengths)


def generate_kernels(T, channels, num_kernels, rng):
    if T < min(KERNEL_LENGTHS):
        raise CtsError(f"series length {T} is shorter than the smallest kernel ({min(KERNEL_LENGTHS)})")
    lengths = rng.choice(KERNEL_LENGTHS, num_kernels).astype(np.int64)
    weights, offsets = [], [0]
    biases = np.empty(num_kernels)
    dilations = np.empty(num_kernels, dtype=np.int64)
    paddings = np.empty(num_kernels, dtype=np.int64)
    for i, L in enumerate(lengths):
        w = rng.standard_normal(channels * L)
        weights.append(w - w.mean())
        offsets.append(offsets[-1] + channels * L)
        biases[i] = rng.uniform(-1.0, 1.0)
        top = np.log2((T - 1) / (L - 1))
        dilations[i] = int(2 ** rng.uniform(0.0, top))
        paddings[i] = ((L - 1) * dilations[i]) // 2 if rng.integers(2) else 0
    return KernelBank(lengths, np.concatenate(weights), np.asarray(offsets, dtype=np.int64),
                      biases, dilations, paddings, channels)


@numba.njit(cache=True)
def _apply(X, lengths, weights, offsets, biases, dilations, paddings):
    n, T, C = X.shape
    K = lengths.shape[0]
    out = np.zeros((n, 2 * K))
    for s in range(n):
        for k in range(K):
            L, dil, pad, b = lengths[k], dilations[k], paddings[k], biases[k]
            w0 = offsets[k]
            n_out = T + 2 * pad - (L - 1) * dil
            positive = 0
            best = -np.inf
            for i in range(-pad, T + pad - (L - 1) * dil):
                acc = b
                for c in range(C):
                    for j in range(L):
                        t = i + j * dil
                        if 0 <= t < T:
                            acc += weights[w0 + c * L + j] * X[s, t, c]
                if acc > best:
                    best = acc
                if acc > 0:
                    positive += 1
            out[s, 2 * k] = positive / n_out
            out[s, 2 * k + 1] = best
    return out


def transform(bank, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X[:, :, None]
    if X.shape[2] != bank.channels:
        raise CtsError(f"expected {bank.channels} channels, got {X.shape[2]}")
    return _apply(np.ascontiguousarray(X), bank.lengths, bank.weights, bank.offsets,
                  bank.biases, bank.dilations, bank.paddings)


def _ridge_fit(F, Y, lam):
    """Dual-form ridge with centred features/targets; returns (W, intercept)."""
    fm, ym = F.mean(axis=0), Y.mean(axis=0)
    Fc, Yc = F - fm, Y - ym
    if len(F) < F.shape[1]:
        W = Fc.T @ np.linalg.solve(Fc @ Fc.T + lam * np.eye(len(F)), Yc)
    else:
        W = np.linalg.solve(Fc.T @ Fc + lam * np.eye(F.shape[1]), Fc.T @ Yc)
    return W, ym - fm @ W


@dataclass
class RocketModel:
    bank: KernelBank
    classes: np.ndarray
    feat_mean: np.ndarray
    feat_std: np.ndarray
    weights: np.ndarray
    intercept: np.ndarray
    ridge_lambda: float

    @property
    def num_features(self):
        return 2 * len(self.bank)


def _onehot_pm(y, classes):
    return np.where(y[:, None] == classes[None, :], 1.0, -1.0)


def rocket_fit(series, labels, num_kernels=1000, seed=0, holdout=0.2):
    series = np.asarray(series, dtype=np.float64)
    if series.ndim == 2:
        series = series[:, :, None]
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if len(classes) < 2:
        raise CtsError("ROCKET needs at least two classes")
    rng = np.random.default_rng(seed)
    bank = generate_kernels(series.shape[1], series.shape[2], num_kernels, rng)
    F = transform(bank, series)
    mean = F.mean(axis=0)
    std = F.std(axis=0)
    std[std == 0] = 1.0
    Fz = (F - mean) / std
    Y = _onehot_pm(labels, classes)

    # pick lambda on a seeded hold-out slice, then refit on everything
    perm = rng.permutation(len(Fz))
    n_hold = max(1, int(round(holdout * len(Fz)))) if len(Fz) > 4 else 0
    best_lam, best_key = RIDGE_GRID[0], None
    if n_hold:
        hold, fit_rows = perm[:n_hold], perm[n_hold:]
        for lam in RIDGE_GRID:
            W, b = _ridge_fit(Fz[fit_rows], Y[fit_rows], lam)
            S = Fz[hold] @ W + b
            acc = np.mean(classes[S.argmax(axis=1)] == labels[hold])
            err = np.mean((S - Y[hold]) ** 2)
            key = (acc, -err)
            if best_key is None or key > best_key:
                best_lam, best_key = lam, key
    W, b = _ridge_fit(Fz, Y, best_lam)
    return RocketModel(bank, classes, mean, std, W, b, best_lam)


def rocket_scores(model, series):
    F = transform(model.bank, series)
    return ((F - model.feat_mean) / model.feat_std) @ model.weights + model.intercept


def rocket_predict(model, series):
    """Returns ``(labels, scores)``; scores are one column per class."""
    S = rocket_scores(model, series)
    return model.classes[S.argmax(axis=1)], S

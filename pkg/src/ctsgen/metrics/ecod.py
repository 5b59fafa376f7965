"""Empirical-CDF outlier scores (ECOD) on flattened series.

Per dimension a point gets the larger of its left-tail, right-tail and
skew-chosen tail surprisal -log(tail probability); the score is the sum over
dimensions. The flag threshold is a quantile of the training scores.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import CtsError


def _flatten(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    return x.reshape(len(x), -1)


@dataclass
class EcodModel:
    sorted_train: np.ndarray  # (N, D) column-wise sorted
    skewness: np.ndarray
    threshold: float
    quantile: float

    @property
    def n_train(self):
        return self.sorted_train.shape[0]


def _skewness(X):
    # constant columns have no tail preference
    xc = X - X.mean(axis=0)
    m2 = np.mean(xc ** 2, axis=0)
    m3 = np.mean(xc ** 3, axis=0)
    tiny = m2 <= 1e-300
    return np.where(tiny, 0.0, m3 / np.where(tiny, 1.0, m2) ** 1.5)


def _combine(left, right, skewness):
    ol, orr = -np.log(left), -np.log(right)
    auto = np.where(skewness < 0, ol, orr)
    return np.maximum(np.maximum(ol, orr), auto).sum(axis=1)


def _tails(sorted_train, X, shift):
    N = len(sorted_train)
    le = np.empty_like(X)
    ge = np.empty_like(X)
    for j in range(X.shape[1]):
        col = sorted_train[:, j]
        le[:, j] = np.searchsorted(col, X[:, j], side="right")
        ge[:, j] = N - np.searchsorted(col, X[:, j], side="left")
    return (le + shift) / (N + shift), (ge + shift) / (N + shift)


def ecod_fit(train, quantile=0.95):
    X = _flatten(train)
    if len(X) < 2:
        raise CtsError("ECOD needs at least two training series")
    if not 0.0 < quantile < 1.0:
        raise CtsError("quantile must be in (0, 1)")
    sk = _skewness(X)
    srt = np.sort(X, axis=0)
    # training points score against their own sample: counts include themselves
    left, right = _tails(srt, X, 0)
    train_scores = _combine(left, right, sk)
    return EcodModel(srt, sk, float(np.quantile(train_scores, quantile)), quantile)


def ecod_score(model, X):
    X = _flatten(X)
    if X.shape[1] != model.sorted_train.shape[1]:
        raise CtsError("ECOD input dimension differs from training")
    # new points: add-one smoothing keeps tails strictly positive
    left, right = _tails(model.sorted_train, X, 1)
    return _combine(left, right, model.skewness)


def ecod_flag(model, X):
    return ecod_score(model, X) > model.threshold

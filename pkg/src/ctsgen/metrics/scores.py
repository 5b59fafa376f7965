"""Classification and ranking scores."""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from ..errors import CtsError


def accuracy(labels, preds):
    labels, preds = np.asarray(labels), np.asarray(preds)
    if labels.shape != preds.shape or labels.size == 0:
        raise CtsError("labels and predictions must be equal-length and non-empty")
    return float(np.mean(labels == preds))


def weighted_f1(labels, preds):
    """Support-weighted mean of per-class F1 over the classes present in ``labels``."""
    labels, preds = np.asarray(labels), np.asarray(preds)
    if labels.shape != preds.shape or labels.size == 0:
        raise CtsError("labels and predictions must be equal-length and non-empty")
    total = 0.0
    for cls in np.unique(labels):
        tp = np.sum((preds == cls) & (labels == cls))
        fp = np.sum((preds == cls) & (labels != cls))
        fn = np.sum((preds != cls) & (labels == cls))
        f1 = 2 * tp / (2 * tp + fp + fn) if tp else 0.0
        total += f1 * np.sum(labels == cls)
    return float(total / labels.size)


def auc(labels, scores):
    """Probability that a random positive outscores a random negative (ties count 1/2)."""
    labels = np.asarray(labels).astype(bool)
    scores = np.asarray(scores, dtype=np.float64)
    n_pos, n_neg = labels.sum(), (~labels).sum()
    if n_pos == 0 or n_neg == 0:
        raise CtsError("AUC needs both positive and negative labels")
    ranks = rankdata(scores)
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2
    return float(u / (n_pos * n_neg))

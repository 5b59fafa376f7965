"""Condition clustering: k-means, k-modes or k-prototypes, picked from the schema.

All three share one Lloyd loop over the mixed dissimilarity

    d(a, b) = sum_numeric (a_j - b_j)^2 + gamma * #{categorical j : a_j != b_j}

which reduces to k-means for all-numeric schemas and to k-modes (mismatch
count, gamma taken as 1) for all-categorical ones. Rows are the encoded
float vectors produced by :class:`~ctsgen.data.ConditionSchema`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import ConditionSchema
from .errors import ConfigError, SchemaError


def default_gamma(rows, schema):
    """Half the mean per-slot standard deviation of the numeric slots."""
    num = schema.numeric_mask
    if not num.any():
        return 1.0
    if num.all():
        return 0.0
    return 0.5 * float(np.mean(np.std(rows[:, num], axis=0)))


def _check_row(c, schema):
    c = np.asarray(c, dtype=np.float64)
    if c.shape != (schema.m,):
        raise SchemaError(f"condition vector must have {schema.m} slots, got shape {c.shape}")
    return c


def dissimilarity(a, b, schema, gamma):
    a, b = _check_row(a, schema), _check_row(b, schema)
    num = schema.numeric_mask
    diff = a[num] - b[num]
    return float(diff @ diff + gamma * np.count_nonzero(a[~num] != b[~num]))


def pairwise(rows, centers, schema, gamma):
    """(n, k) matrix of mixed dissimilarities."""
    rows = np.atleast_2d(rows)
    centers = np.atleast_2d(centers)
    num = schema.numeric_mask
    out = np.zeros((len(rows), len(centers)))
    if num.any():
        # direct differences (not the expanded form) keep exact ties exact
        diff = rows[:, None, num] - centers[None, :, num]
        out += np.einsum("ikj,ikj->ik", diff, diff)
    if (~num).any():
        mism = (rows[:, None, ~num] != centers[None, :, ~num]).sum(-1)
        out += gamma * mism
    return out


@dataclass
class ClusterModel:
    k: int
    centers: np.ndarray  # (k, m)
    assignment: np.ndarray  # (n,)
    schema: ConditionSchema
    gamma: float
    iterations_run: int = 0
    objective_trace: list = field(default_factory=list)
    method: str = "k-prototypes"

    def members(self):
        """Indices of each cluster's members, in ascending order."""
        order = np.argsort(self.assignment, kind="stable")
        bounds = np.searchsorted(self.assignment[order], np.arange(self.k + 1))
        return [order[bounds[j]:bounds[j + 1]] for j in range(self.k)]

    def to_dict(self):
        return {
            "k": self.k, "method": self.method, "gamma": self.gamma,
            "iterations_run": self.iterations_run,
            "centers": self.centers.tolist(),
            "assignment": self.assignment.tolist(),
            "objective_trace": list(self.objective_trace),
            "schema_hash": self.schema.fingerprint(),
        }

    @classmethod
    def from_dict(cls, d, schema):
        if d.get("schema_hash") not in (None, schema.fingerprint()):
            raise SchemaError("cluster model was fitted on a different condition schema")
        return cls(int(d["k"]), np.asarray(d["centers"], dtype=np.float64),
                   np.asarray(d["assignment"], dtype=np.int64), schema, float(d["gamma"]),
                   int(d["iterations_run"]), list(d.get("objective_trace", [])), d.get("method", "k-prototypes"))


def method_for(schema):
    num = schema.numeric_mask
    if num.all():
        return "k-means"
    if not num.any():
        return "k-modes"
    return "k-prototypes"


def _update_centers(rows, assign, k, schema, old):
    num = schema.numeric_mask
    centers = old.copy()
    for j in range(k):
        sel = rows[assign == j]
        if not len(sel):
            continue
        centers[j, num] = sel[:, num].mean(axis=0)
        for col in np.flatnonzero(~num):
            slot = schema.slots[col]
            counts = np.bincount(sel[:, col].astype(int), minlength=len(slot.vocabulary))
            tied = np.flatnonzero(counts == counts.max())
            # lexicographically smallest token wins a tie
            centers[j, col] = min(tied, key=lambda code: slot.vocabulary[code])
    return centers


def _kpp_init(rows, k, schema, gamma, rng):
    n = len(rows)
    chosen = [int(rng.integers(n))]
    d = pairwise(rows, rows[chosen], schema, gamma)[:, 0]
    for _ in range(1, k):
        total = d.sum()
        if total <= 0:
            break
        nxt = int(rng.choice(n, p=d / total))
        chosen.append(nxt)
        d = np.minimum(d, pairwise(rows, rows[nxt:nxt + 1], schema, gamma)[:, 0])
    return rows[chosen].copy()


def fit(rows, schema, k, max_iterations=100, seed=0, gamma=None):
    """Lloyd iterations from seeded k-means++ starts.

    Raises :class:`ConfigError` when ``k`` exceeds the number of distinct
    condition vectors.
    """
    rows = schema.validate_rows(rows)
    if len(rows) == 0:
        raise ConfigError("cannot cluster an empty condition set")
    if max_iterations < 1:
        raise ConfigError("max_iterations must be >= 1")
    n_distinct = len(np.unique(rows, axis=0))
    if not 1 <= k <= n_distinct:
        raise ConfigError(f"k={k} but only {n_distinct} distinct condition vectors")
    method = method_for(schema)
    if gamma is None:
        gamma = default_gamma(rows, schema)
    if method == "k-modes" and gamma <= 0:
        gamma = 1.0
    rng = np.random.default_rng(seed)

    centers = _kpp_init(rows, k, schema, gamma, rng)
    # k-means++ only stops early if every remaining point coincides with a
    # center, which cannot happen while k <= n_distinct
    assert len(centers) == k
    D = pairwise(rows, centers, schema, gamma)
    assign = D.argmin(axis=1)
    trace = [float(D[np.arange(len(rows)), assign].sum())]
    it = 0
    for it in range(1, max_iterations + 1):
        centers = _update_centers(rows, assign, k, schema, centers)
        D = pairwise(rows, centers, schema, gamma)
        new = D.argmin(axis=1)
        new = _reseed_empty(rows, new, centers, D, k, schema, gamma)
        D = pairwise(rows, centers, schema, gamma)
        cost = float(D[np.arange(len(rows)), new].sum())
        trace.append(cost)
        if np.array_equal(new, assign):
            break
        assign = new
    return ClusterModel(k, centers, assign.astype(np.int64), schema, float(gamma), it, trace, method)


def _reseed_empty(rows, assign, centers, D, k, schema, gamma):
    """Move each empty cluster's center onto the worst-served point."""
    for j in range(k):
        if np.any(assign == j):
            continue
        cost = D[np.arange(len(rows)), assign]
        # never steal the only member of another cluster
        sizes = np.bincount(assign, minlength=k)
        cost = np.where(sizes[assign] > 1, cost, -1.0)
        far = int(np.argmax(cost))
        centers[j] = rows[far]
        assign[far] = j
        D[:, j] = pairwise(rows, centers[j:j + 1], schema, gamma)[:, 0]
    return assign


def assign(model, c):
    c = _check_row(c, model.schema)
    return int(pairwise(c[None, :], model.centers, model.schema, model.gamma)[0].argmin())


def objective(model, rows):
    D = pairwise(rows, model.centers, model.schema, model.gamma)
    return float(D[np.arange(len(rows)), model.assignment].sum())

"""White-box regressors from condition vectors to encoder means.

Three variants share one interface:

* ``linear``: ridge least squares with an unpenalized intercept,
* ``tree``:   one multi-output CART tree, split criterion = summed per-output SSE,
* ``forest``: bagged trees with per-split feature subsampling.

Nominal slots are one-hot encoded (schema order, then vocabulary order);
ordinal slots enter as their rank, like a numeric slot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .data import ConditionSchema
from .errors import ConfigError, CtsError, SchemaError, ShapeError

VARIANTS = ("linear", "tree", "forest")


@dataclass
class TreeConfig:
    max_depth: int | None = 8
    min_samples_leaf: int = 1
    seed: int = 0
    n_trees: int = 20
    bootstrap: bool = True
    max_features: int | str | None = "sqrt"  # forest only
    ridge: float = 1e-6  # linear only

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 1:
            raise ConfigError("max_depth must be >= 1 (or None for unbounded)")
        if self.min_samples_leaf < 1:
            raise ConfigError("min_samples_leaf must be >= 1")
        if self.n_trees < 1:
            raise ConfigError("n_trees must be >= 1")


def design_columns(schema):
    """``(slot_index, category_code or None)`` for every design-matrix column."""
    cols = []
    for j, slot in enumerate(schema.slots):
        if slot.is_numeric or slot.ordinal:
            cols.append((j, None))
        else:
            cols.extend((j, code) for code in range(len(slot.vocabulary)))
    return cols


def encode_conditions(rows, schema):
    """Numeric slots pass through, categorical slots become one-hot blocks."""
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if rows.shape[1] != schema.m:
        raise SchemaError(f"expected {schema.m} condition slots, got {rows.shape[1]}")
    blocks = []
    for j, slot in enumerate(schema.slots):
        col = rows[:, j]
        if slot.is_numeric:
            blocks.append(col[:, None])
            continue
        codes = col.astype(int)
        if np.any(codes != col) or codes.min() < 0 or codes.max() >= len(slot.vocabulary):
            raise SchemaError(f"slot {slot.name!r}: category outside the vocabulary")
        if slot.ordinal:
            blocks.append(col[:, None])
        else:
            blocks.append(np.eye(len(slot.vocabulary))[codes])
    return np.hstack(blocks)


# -- tree ----------------------------------------------------------------------

@dataclass
class Tree:
    feature: np.ndarray  # -1 for leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # (nodes, d)
    n_samples: np.ndarray
    gain: np.ndarray  # SSE decrease at each split (0 at leaves)

    @property
    def n_leaves(self):
        return int(np.sum(self.feature < 0))

    def apply(self, X):
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return node
            ni = node[inner]
            go_left = X[np.flatnonzero(inner), f[inner]] <= self.threshold[ni]
            node[inner] = np.where(go_left, self.left[ni], self.right[ni])

    def predict(self, X):
        return self.value[self.apply(X)]

    def to_dict(self):
        return {k: getattr(self, k).tolist() for k in
                ("feature", "threshold", "left", "right", "value", "n_samples", "gain")}

    @classmethod
    def from_dict(cls, d):
        return cls(*(np.asarray(d[k]) for k in
                     ("feature", "threshold", "left", "right", "value", "n_samples", "gain")))


@numba.njit(cache=True)
def _scan_splits(X, Y, features, msl):
    r, d = Y.shape
    total = np.zeros(d)
    for i in range(r):
        for k in range(d):
            total[k] += Y[i, k]
    best_f, best_thr, best_score = -1, 0.0, -np.inf
    cs = np.empty(d)
    for f in features:
        x = X[:, f]
        order = np.argsort(x, kind="mergesort")
        cs[:] = 0.0
        for i in range(r - 1):
            row = order[i]
            for k in range(d):
                cs[k] += Y[row, k]
            nl = i + 1
            if nl < msl or r - nl < msl:
                continue
            lo, hi = x[order[i]], x[order[i + 1]]
            if not hi > lo:
                continue
            sl = 0.0
            sr = 0.0
            for k in range(d):
                sl += cs[k] * cs[k]
                rk = total[k] - cs[k]
                sr += rk * rk
            score = sl / nl + sr / (r - nl)
            if score > best_score:
                best_f, best_thr, best_score = f, 0.5 * (lo + hi), score
    base = 0.0
    for k in range(d):
        base += total[k] * total[k]
    return best_f, best_thr, best_score - base / r


def _best_split(X, Y, features, msl):
    """Best (feature, threshold, gain) over midpoints of sorted distinct values.

    Gain is the SSE decrease. Returns None when no admissible split exists.
    Ties keep the lowest feature index, then the lowest threshold.
    """
    f, thr, gain = _scan_splits(np.ascontiguousarray(X), np.ascontiguousarray(Y),
                                np.asarray(features, dtype=np.int64), int(msl))
    if f < 0:
        return None
    return int(f), float(thr), max(float(gain), 0.0)


def _leaf_value(Y):
    if np.all(Y == Y[0]):
        return Y[0].copy()  # exact for pure leaves
    return Y.mean(axis=0)


def build_tree(X, Y, max_depth=None, min_samples_leaf=1, max_features=None, rng=None):
    """Greedy CART on (X, Y); an impure node is split whenever a split exists."""
    n, p = X.shape
    feature, threshold, left, right, value, count, gain = [], [], [], [], [], [], []

    def new_node(rows):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(_leaf_value(Y[rows]))
        count.append(len(rows))
        gain.append(0.0)
        return len(feature) - 1

    root = new_node(np.arange(n))
    stack = [(root, np.arange(n), 0)]
    while stack:
        node, rows, depth = stack.pop()
        if max_depth is not None and depth >= max_depth:
            continue
        Yn = Y[rows]
        if len(rows) < 2 * min_samples_leaf or np.all(Yn == Yn[0]):
            continue
        if max_features is None or max_features >= p:
            feats = np.arange(p)
        else:
            feats = np.sort(rng.choice(p, size=max_features, replace=False))
        found = _best_split(X[rows], Yn, feats, min_samples_leaf)
        if found is None:
            continue
        f, thr, g = found
        mask = X[rows, f] <= thr
        lrows, rrows = rows[mask], rows[~mask]
        li, ri = new_node(lrows), new_node(rrows)
        feature[node], threshold[node], left[node], right[node], gain[node] = f, thr, li, ri, g
        # right pushed first so the left subtree is expanded first
        stack.append((ri, rrows, depth + 1))
        stack.append((li, lrows, depth + 1))
    return Tree(np.array(feature), np.array(threshold), np.array(left), np.array(right),
                np.array(value).reshape(len(value), Y.shape[1]), np.array(count), np.array(gain))


# -- models --------------------------------------------------------------------

@dataclass
class MappingModel:
    variant: str
    schema: ConditionSchema
    out_dim: int
    coef: np.ndarray | None = None  # linear: (p + 1, d), intercept last
    trees: list = field(default_factory=list)
    train_loss: float = float("nan")
    n_train: int = 0


def _resolve_max_features(spec, p):
    if spec is None:
        return None
    if spec == "sqrt":
        return max(1, math.ceil(math.sqrt(p)))
    return max(1, min(int(spec), p))


def ridge_solve(A, Y, lam):
    """Normal equations with the last column of ``A`` left unpenalized."""
    pen = np.full(A.shape[1], lam)
    pen[-1] = 0.0
    return np.linalg.solve(A.T @ A + np.diag(pen), A.T @ Y)


def fit(rows, targets, schema, variant="tree", cfg=None):
    """Fit ``f`` on condition rows -> mean latents, minimizing squared error."""
    if variant not in VARIANTS:
        raise ConfigError(f"unknown mapping variant {variant!r}")
    cfg = cfg or TreeConfig()
    X = encode_conditions(rows, schema)
    Y = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    if len(X) == 0:
        raise CtsError("cannot fit a mapping on an empty selection")
    if len(X) != len(Y):
        raise ShapeError(f"{len(X)} condition rows but {len(Y)} targets")
    model = MappingModel(variant, schema, Y.shape[1], n_train=len(X))
    if variant == "linear":
        A = np.hstack([X, np.ones((len(X), 1))])
        model.coef = ridge_solve(A, Y, cfg.ridge)
    elif variant == "tree":
        model.trees = [build_tree(X, Y, cfg.max_depth, cfg.min_samples_leaf)]
    else:
        mf = _resolve_max_features(cfg.max_features, X.shape[1])
        for child in np.random.SeedSequence(cfg.seed).spawn(cfg.n_trees):
            rng = np.random.default_rng(child)
            rows_b = rng.integers(0, len(X), len(X)) if cfg.bootstrap else np.arange(len(X))
            model.trees.append(build_tree(X[rows_b], Y[rows_b], cfg.max_depth,
                                          cfg.min_samples_leaf, mf, rng))
    resid = _predict_design(model, X) - Y
    model.train_loss = float(np.mean(np.sum(resid * resid, axis=1)))
    return model


def _predict_design(model, X):
    if model.variant == "linear":
        return X @ model.coef[:-1] + model.coef[-1]
    out = model.trees[0].predict(X)
    if len(model.trees) > 1:
        out = out.copy()
        for t in model.trees[1:]:
            out += t.predict(X)
        out /= len(model.trees)
    return out


def predict(model, c):
    """Predicted mean latent for one condition row (or a batch of rows)."""
    c = np.asarray(c, dtype=np.float64)
    out = _predict_design(model, encode_conditions(c, model.schema))
    return out[0] if c.ndim == 1 else out


def sample_latent(mu0_prime, log_var0, noise=None):
    """``mu0' + exp(log_var0 / 2) * noise``; ``noise=None`` gives ``mu0'``."""
    mu = np.asarray(mu0_prime, dtype=np.float64)
    lv = np.asarray(log_var0, dtype=np.float64)
    if mu.shape != lv.shape:
        raise ShapeError("mu0_prime and log_var0 must have equal shapes")
    if noise is None:
        return mu.copy()
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != mu.shape:
        raise ShapeError("noise must match the latent shape")
    return mu + np.exp(0.5 * lv) * noise


# -- explanation ---------------------------------------------------------------

@dataclass
class Explanation:
    variant: str
    rules: str
    importances: dict  # condition name -> share of total SSE decrease
    tree_json: list = field(default_factory=list)  # one entry per tree
    coefficients: dict | None = None  # linear variant only
    is_linear: bool = False


def _split_text(schema, cols, f, thr, left):
    slot_i, code = cols[f]
    slot = schema.slots[slot_i]
    if code is None and not slot.is_numeric:
        # ordinal rank threshold, shown as the last category on the left
        return f"{slot.name} {'<=' if left else '>'} {slot.vocabulary[int(math.floor(thr))]}"
    if code is None:
        return f"{slot.name} {'<=' if left else '>'} {thr:.6g}"
    return f"{slot.name} {'!=' if left else '=='} {slot.vocabulary[code]}"


def _tree_rules(tree, schema, cols, digits=4):
    lines = []

    def leaf(node, pad):
        v = tree.value[node]
        head = ", ".join(f"{x:.{digits}g}" for x in v[:4]) + (", ..." if len(v) > 4 else "")
        lines.append(f"{pad}leaf n={int(tree.n_samples[node])} mu=[{head}]")

    def walk(node, pad):
        f = int(tree.feature[node])
        if f < 0:
            leaf(node, pad)
            return
        lines.append(f"{pad}if {_split_text(schema, cols, f, tree.threshold[node], True)}:")
        walk(int(tree.left[node]), pad + "  ")
        lines.append(f"{pad}else:  # {_split_text(schema, cols, f, tree.threshold[node], False)}")
        walk(int(tree.right[node]), pad + "  ")

    if tree.feature[0] >= 0:
        walk(0, "")
    return lines


def _tree_json(tree, schema, cols, node=0):
    f = int(tree.feature[node])
    if f < 0:
        return {"leaf": tree.value[node].tolist(), "n": int(tree.n_samples[node])}
    slot_i, code = cols[f]
    slot = schema.slots[slot_i]
    d = {"feature": slot.name, "n": int(tree.n_samples[node]), "gain": float(tree.gain[node])}
    if code is None:
        d["threshold"] = float(tree.threshold[node])
    else:
        # left branch holds every category except this one
        d["categories_right"] = [slot.vocabulary[code]]
    d["children"] = [_tree_json(tree, schema, cols, int(tree.left[node])),
                     _tree_json(tree, schema, cols, int(tree.right[node]))]
    return d


def explain(model):
    """Depth-first rule listing plus normalized per-condition importances.

    The linear variant has no rules; its coefficients are returned instead
    and ``is_linear`` is set.
    """
    schema = model.schema
    cols = design_columns(schema)
    names = schema.names
    if model.variant == "linear":
        coefs = {}
        for f, (slot_i, code) in enumerate(cols):
            label = names[slot_i] if code is None else f"{names[slot_i]}=={schema.slots[slot_i].vocabulary[code]}"
            coefs[label] = model.coef[f].tolist()
        coefs["intercept"] = model.coef[-1].tolist()
        return Explanation("linear", "", {n: 0.0 for n in names}, [], coefs, True)

    raw = np.zeros(schema.m)
    for t in model.trees:
        inner = t.feature >= 0
        for f, g in zip(t.feature[inner], t.gain[inner]):
            raw[cols[f][0]] += g
    total = raw.sum()
    imp = raw / total if total > 0 else raw
    blocks = []
    for i, t in enumerate(model.trees):
        lines = _tree_rules(t, schema, cols)
        if len(model.trees) > 1 and lines:
            lines = [f"# tree {i}"] + lines
        blocks.extend(lines)
    return Explanation(model.variant, "\n".join(blocks), dict(zip(names, imp.tolist())),
                       [_tree_json(t, schema, cols) for t in model.trees])

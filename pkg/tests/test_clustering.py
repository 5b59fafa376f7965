import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.metrics import adjusted_rand_score

from ctsgen import clustering
from ctsgen.data import CATEGORICAL, ConditionSchema, Slot
from ctsgen.errors import ConfigError, SchemaError

NUM2 = ConditionSchema((Slot("a"), Slot("b")))
BIN4 = ConditionSchema(tuple(Slot(n, CATEGORICAL, ("0", "1"))
                             for n in ("periodicity", "rapid_change", "trend", "state")))
MIXED = ConditionSchema((Slot("x"), Slot("c", CATEGORICAL, ("p", "q"))))


def test_dissimilarity_examples():
    assert clustering.dissimilarity([1, 0, 1, 0], [1, 0, 1, 0], BIN4, 1.0) == 0
    assert clustering.dissimilarity([1, 0, 1, 0], [1, 1, 0, 0], BIN4, 1.0) == 2
    assert clustering.dissimilarity([0, 0], [3, 1], MIXED, 0.5) == 9.5


def test_dissimilarity_schema_mismatch():
    with pytest.raises(SchemaError):
        clustering.dissimilarity([0, 0, 0], [0, 0], MIXED, 0.5)


grid = st.integers(-1000, 1000).map(lambda v: v / 100)  # squares never underflow


@given(grid, grid, st.integers(0, 1), st.integers(0, 1))
def test_dissimilarity_symmetric_and_zero_only_on_equal(a, b, ca, cb):
    u, v = np.array([a, ca]), np.array([b, cb])
    d = clustering.dissimilarity(u, v, MIXED, 0.5)
    assert d == clustering.dissimilarity(v, u, MIXED, 0.5)
    assert (d == 0) == (u[0] == v[0] and ca == cb)


def blobs(rng, centers, per=30, radius=0.5):
    pts, labels = [], []
    for j, c in enumerate(centers):
        ang = rng.uniform(0, 2 * np.pi, per)
        r = radius * np.sqrt(rng.uniform(0, 1, per))
        pts.append(np.c_[c[0] + r * np.cos(ang), c[1] + r * np.sin(ang)])
        labels += [j] * per
    return np.vstack(pts), np.array(labels)


def test_two_blobs_recovered_exactly():
    rng = np.random.default_rng(0)
    X, y = blobs(rng, [(0, 0), (10, 10)])
    m = clustering.fit(X, NUM2, 2, seed=0)
    assert m.method == "k-means"
    # brute force over the two labelings of a 2-partition
    assert np.array_equal(m.assignment, y) or np.array_equal(m.assignment, 1 - y)
    assert adjusted_rand_score(y, m.assignment) == 1.0


def test_k1_center_is_mean_or_mode():
    X = np.array([[0.0, 1.0], [2.0, 1.0], [4.0, 0.0]])
    m = clustering.fit(X, MIXED, 1)
    assert m.centers[0, 0] == pytest.approx(2.0)
    assert m.centers[0, 1] == 1  # "q" twice
    rows = np.array([[1, 0, 1, 0], [1, 1, 1, 0], [0, 0, 1, 1]], float)
    m = clustering.fit(rows, BIN4, 1)
    assert np.array_equal(m.centers[0], [1, 0, 1, 0])


def test_mode_tie_goes_to_smallest_token():
    schema = ConditionSchema((Slot("c", CATEGORICAL, ("zeta", "alpha")),))
    m = clustering.fit(np.array([[0.0], [1.0]]), schema, 1)
    assert m.centers[0, 0] == 1  # "alpha" < "zeta"


PATTERNS = np.array([[1, 1, 1, 0], [0, 0, 0, 0], [1, 0, 0, 1], [0, 1, 1, 0], [1, 0, 1, 1]], float)


def binary_condition_set(rng, per=20, flip=0.0):
    rows, labels = [], []
    for j, p in enumerate(PATTERNS):
        block = np.repeat(p[None], per, axis=0)
        mask = rng.random(block.shape) < flip
        block[mask] = 1 - block[mask]
        rows.append(block)
        labels += [j] * per
    return np.vstack(rows), np.array(labels)


def test_binary_conditions_aptly_grouped():
    rng = np.random.default_rng(1)
    rows, _ = binary_condition_set(rng, flip=0.1)
    m = clustering.fit(rows, BIN4, 5, seed=0)
    assert m.method == "k-modes"
    D = clustering.pairwise(rows, m.centers, BIN4, m.gamma)
    own = D[np.arange(len(rows)), m.assignment]
    assert np.all(own <= D.min(axis=1))


def test_k_too_large_and_empty_input():
    with pytest.raises(ConfigError):
        clustering.fit(np.zeros((5, 2)), NUM2, 2)
    with pytest.raises(ConfigError):
        clustering.fit(np.zeros((0, 2)), NUM2, 1)


def test_assign_examples():
    m = clustering.ClusterModel(3, np.array([[0.0, 0.0], [2.0, 0.0], [5.0, 5.0]]),
                                np.zeros(1, int), NUM2, 0.0)
    assert clustering.assign(m, [2.0, 0.0]) == 1
    assert clustering.assign(m, [1.0, 0.0]) == 0  # equidistant to 0 and 1


def test_assign_matches_linear_scan():
    rng = np.random.default_rng(2)
    X = np.c_[rng.random(200), rng.integers(0, 2, 200)]
    m = clustering.fit(X, MIXED, 6, seed=1)
    for c in np.c_[rng.random(1000), rng.integers(0, 2, 1000)]:
        scan = [clustering.dissimilarity(c, z, MIXED, m.gamma) for z in m.centers]
        assert clustering.assign(m, c) == int(np.argmin(scan))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), k=st.integers(1, 6), kind=st.sampled_from(["num", "cat", "mixed"]))
def test_objective_never_increases_and_centers_are_valid(seed, k, kind):
    rng = np.random.default_rng(seed)
    n = 60
    schema = {"num": NUM2, "cat": BIN4, "mixed": MIXED}[kind]
    cols = []
    for slot in schema.slots:
        cols.append(rng.random(n) if slot.is_numeric else rng.integers(0, len(slot.vocabulary), n).astype(float))
    X = np.c_[tuple(cols)]
    k = min(k, len(np.unique(X, axis=0)))
    m = clustering.fit(X, schema, k, seed=seed)
    trace = np.array(m.objective_trace)
    assert np.all(np.diff(trace) <= 1e-9 * (1 + trace[:-1]))
    assert set(np.unique(m.assignment)) <= set(range(k))
    # converged assignment is the dissimilarity argmin
    D = clustering.pairwise(X, m.centers, schema, m.gamma)
    if m.iterations_run < 100:
        assert np.all(D[np.arange(n), m.assignment] <= D.min(axis=1) + 1e-12)
    num = schema.numeric_mask
    for j in range(k):
        members = X[m.assignment == j]
        if len(members) and m.iterations_run < 100:
            assert np.allclose(m.centers[j, num], members[:, num].mean(axis=0))


def test_deterministic_and_permutation_only_relabels():
    rng = np.random.default_rng(3)
    X, _ = blobs(rng, [(0, 0), (5, 0), (0, 5)], per=20)
    a = clustering.fit(X, NUM2, 3, seed=7)
    b = clustering.fit(X, NUM2, 3, seed=7)
    assert np.array_equal(a.assignment, b.assignment) and np.array_equal(a.centers, b.centers)
    perm = rng.permutation(len(X))
    c = clustering.fit(X[perm], NUM2, 3, seed=11)
    assert adjusted_rand_score(a.assignment[perm], c.assignment) == 1.0


def test_round_trip_and_schema_guard():
    X = np.random.default_rng(4).random((30, 2))
    m = clustering.fit(X, NUM2, 3)
    back = clustering.ClusterModel.from_dict(m.to_dict(), NUM2)
    assert np.array_equal(back.centers, m.centers) and np.array_equal(back.assignment, m.assignment)
    with pytest.raises(SchemaError):
        clustering.ClusterModel.from_dict(m.to_dict(), MIXED)


def test_default_gamma():
    X = np.c_[np.array([0.0, 1.0, 0.0, 1.0]), np.array([0, 1, 0, 1.0])]
    assert clustering.default_gamma(X, MIXED) == pytest.approx(0.25)
    assert clustering.default_gamma(X, NUM2) == 0.0

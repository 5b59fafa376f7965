import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ctsgen import nn
from ctsgen.errors import CtsError, NonFiniteError, ShapeError


def one_layer(W, b, act="identity"):
    return nn.DenseNet([nn.Layer(np.asarray(W, float), np.asarray(b, float), act)])


def numeric_grads(net, x, g_out, h=1e-4):
    """Central differences of <g_out, forward(x)> w.r.t. every parameter."""
    out = []
    for p in net.parameters():
        gp = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = p[i]
            p[i] = old + h
            net.version += 1
            up = np.sum(nn.predict(net, x) * g_out)
            p[i] = old - h
            net.version += 1
            dn = np.sum(nn.predict(net, x) * g_out)
            p[i] = old
            net.version += 1
            gp[i] = (up - dn) / (2 * h)
        out.append(gp)
    return out


def max_rel_err(a_list, n_list, floor=1e-6):
    worst = 0.0
    for a, n in zip(a_list, n_list):
        err = np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(err.max()))
    return worst


def test_identity_layer():
    out, _ = nn.forward(one_layer(np.eye(2), [0, 0]), np.array([1.0, 2.0]))
    assert np.array_equal(out, [1.0, 2.0])


def test_relu_and_tanh():
    out, _ = nn.forward(one_layer(np.eye(2), [0, 0], "relu"), np.array([-1.0, 2.0]))
    assert np.array_equal(out, [0.0, 2.0])
    out, _ = nn.forward(one_layer([[1.0]], [0.0], "tanh"), np.array([0.0]))
    assert out[0] == 0.0


def test_dimension_and_finiteness_errors():
    net = one_layer(np.eye(2), [0, 0])
    with pytest.raises(ShapeError):
        nn.forward(net, np.ones(3))
    with pytest.raises(NonFiniteError):
        nn.forward(net, np.array([np.nan, 1.0]))


def test_layers_must_chain():
    with pytest.raises(ShapeError):
        nn.DenseNet([nn.Layer(np.ones((3, 2)), np.zeros(3), "relu"),
                     nn.Layer(np.ones((1, 4)), np.zeros(1), "identity")])


def test_zero_output_grad_gives_zero_grads():
    rng = np.random.default_rng(0)
    net = nn.DenseNet.init([3, 4, 2], ["tanh", "identity"], rng)
    _, cache = nn.forward(net, rng.standard_normal(3))
    grads, gin = nn.backward(net, cache, np.zeros(2))
    assert all(np.all(g == 0) for g in grads)
    assert np.all(gin == 0)


def test_linear_layer_grad_closed_form():
    W = np.array([[2.0, -1.0], [0.5, 3.0]])
    net = one_layer(W, [0.1, 0.2])
    x, g = np.array([1.0, 0.0]), np.array([1.0, 1.0])
    _, cache = nn.forward(net, x)
    (gW, gb), gin = nn.backward(net, cache, g)
    assert np.array_equal(gb, [1.0, 1.0])
    assert np.array_equal(gW, np.outer(g, x))
    assert np.allclose(gin, W.T @ g)


def test_stale_cache_rejected():
    rng = np.random.default_rng(1)
    net = nn.DenseNet.init([2, 2], ["identity"], rng)
    _, cache = nn.forward(net, np.ones(2))
    net.version += 1
    with pytest.raises(CtsError):
        nn.backward(net, cache, np.ones(2))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1),
       sizes=st.lists(st.integers(1, 8), min_size=2, max_size=4),
       batch=st.integers(1, 3))
def test_gradients_match_finite_differences(seed, sizes, batch):
    rng = np.random.default_rng(seed)
    acts = ["tanh"] * (len(sizes) - 2) + ["identity"]
    net = nn.DenseNet.init(sizes, acts, rng)
    x = rng.standard_normal((batch, sizes[0]))
    g = rng.standard_normal((batch, sizes[-1]))
    _, cache = nn.forward(net, x)
    analytic, _ = nn.backward(net, cache, g)
    assert max_rel_err(analytic, numeric_grads(net, x, g)) < 1e-3


def test_adam_zero_grad_is_noop():
    p = [np.array([1.0, -2.0])]
    state = nn.AdamState.zeros_like(p)
    nn.adam_step(p, [np.zeros(2)], state, nn.TrainConfig())
    assert np.array_equal(p[0], [1.0, -2.0])
    assert state.step == 1


def test_adam_first_step_closed_form():
    cfg = nn.TrainConfig(learning_rate=0.01)
    for g in (0.3, -2.0, 1e-3):
        p = [np.array([0.0])]
        nn.adam_step(p, [np.array([g])], nn.AdamState.zeros_like(p), cfg)
        assert p[0][0] == pytest.approx(-0.01 * g / (abs(g) + 1e-8), rel=1e-6)


def test_adam_quadratic_descent():
    cfg = nn.TrainConfig(learning_rate=0.1)
    w = [np.array([1.0])]
    state = nn.AdamState.zeros_like(w)
    for _ in range(200):
        nn.adam_step(w, [2 * w[0]], state, cfg)
    assert abs(w[0][0]) < 0.05
    assert state.step == 200


def test_adam_rejects_non_finite_without_mutation():
    p = [np.array([1.0])]
    state = nn.AdamState.zeros_like(p)
    with pytest.raises(NonFiniteError):
        nn.adam_step(p, [np.array([np.inf])], state, nn.TrainConfig())
    assert p[0][0] == 1.0 and state.step == 0


def test_train_config_validation():
    with pytest.raises(ValueError):
        nn.TrainConfig(beta1=1.0)
    with pytest.raises(ValueError):
        nn.TrainConfig(learning_rate=0)


def test_serialization_round_trip():
    rng = np.random.default_rng(2)
    net = nn.DenseNet.init([5, 7, 3], ["relu", "identity"], rng)
    back = nn.DenseNet.from_dict(net.to_dict())
    x = rng.standard_normal((4, 5))
    assert np.array_equal(nn.predict(net, x), nn.predict(back, x))

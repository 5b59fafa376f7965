"""Dense feed-forward networks with hand-written backprop and Adam.

Everything runs in float64. Inputs may be a single vector ``(in_dim,)`` or a
batch ``(batch, in_dim)``; outputs follow the same convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CtsError, NonFiniteError, ShapeError

ACTIVATIONS = ("identity", "relu", "tanh")


def _activate(name, pre):
    if name == "identity":
        return pre
    if name == "relu":
        return np.maximum(pre, 0.0)
    if name == "tanh":
        return np.tanh(pre)
    raise ValueError(f"unknown activation {name!r}")


def _activation_grad(name, pre, post, upstream):
    if name == "identity":
        return upstream
    if name == "relu":
        return upstream * (pre > 0.0)
    if name == "tanh":
        return upstream * (1.0 - post * post)
    raise ValueError(f"unknown activation {name!r}")


@dataclass
class Layer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str = "identity"

    @property
    def in_dim(self):
        return self.weight.shape[1]

    @property
    def out_dim(self):
        return self.weight.shape[0]


class DenseNet:
    """An ordered stack of fully connected layers."""

    def __init__(self, layers):
        layers = list(layers)
        if not layers:
            raise ShapeError("a DenseNet needs at least one layer")
        for i, layer in enumerate(layers):
            if layer.activation not in ACTIVATIONS:
                raise ValueError(f"layer {i}: unknown activation {layer.activation!r}")
            layer.weight = np.ascontiguousarray(layer.weight, dtype=np.float64)
            layer.bias = np.ascontiguousarray(layer.bias, dtype=np.float64)
            if layer.weight.ndim != 2 or layer.bias.shape != (layer.weight.shape[0],):
                raise ShapeError(f"layer {i}: weight/bias shapes do not agree")
            if i and layers[i - 1].out_dim != layer.in_dim:
                raise ShapeError(
                    f"layer {i} expects {layer.in_dim} inputs but layer {i - 1} "
                    f"produces {layers[i - 1].out_dim}"
                )
            if not (np.isfinite(layer.weight).all() and np.isfinite(layer.bias).all()):
                raise NonFiniteError(f"layer {i} has non-finite parameters")
        self.layers = layers
        # bumped on every in-place parameter update; caches remember it
        self.version = 0

    @classmethod
    def init(cls, sizes, activations, rng):
        """Glorot-uniform weights, zero biases.

        ``sizes`` lists the layer widths including input and output, so a net
        with ``len(sizes) - 1`` layers is built.
        """
        if len(activations) != len(sizes) - 1:
            raise ValueError("need one activation per layer")
        layers = []
        for fan_in, fan_out, act in zip(sizes[:-1], sizes[1:], activations):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            w = rng.uniform(-limit, limit, size=(fan_out, fan_in))
            layers.append(Layer(w, np.zeros(fan_out), act))
        return cls(layers)

    @property
    def input_dim(self):
        return self.layers[0].in_dim

    @property
    def output_dim(self):
        return self.layers[-1].out_dim

    def parameters(self):
        """Flat list ``[W0, b0, W1, b1, ...]`` (the arrays themselves, not copies)."""
        out = []
        for layer in self.layers:
            out.extend((layer.weight, layer.bias))
        return out

    def copy(self):
        return DenseNet(
            [Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers]
        )

    def to_dict(self):
        return {
            "sizes": [self.input_dim] + [l.out_dim for l in self.layers],
            "activations": [l.activation for l in self.layers],
            # row-major (out, in) weights followed by bias, layer by layer
            "parameters": [
                {"weight": l.weight.ravel().tolist(), "bias": l.bias.tolist()}
                for l in self.layers
            ],
        }

    @classmethod
    def from_dict(cls, d):
        sizes = d["sizes"]
        layers = []
        for fan_in, fan_out, act, p in zip(sizes[:-1], sizes[1:], d["activations"], d["parameters"]):
            w = np.asarray(p["weight"], dtype=np.float64).reshape(fan_out, fan_in)
            layers.append(Layer(w, np.asarray(p["bias"], dtype=np.float64), act))
        return cls(layers)


@dataclass
class ForwardCache:
    inputs: list  # input to each layer
    pre: list  # pre-activations
    post: list  # post-activations
    single: bool  # caller passed a single vector
    version: int
    net_id: int


def forward(net, x):
    """Run ``net`` on ``x``; returns ``(output, cache)``."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.input_dim:
        raise ShapeError(f"expected input dim {net.input_dim}, got shape {x.shape}")
    if not np.isfinite(x).all():
        raise NonFiniteError("non-finite network input")
    inputs, pres, posts = [], [], []
    h = x
    for layer in net.layers:
        inputs.append(h)
        pre = h @ layer.weight.T + layer.bias
        h = _activate(layer.activation, pre)
        pres.append(pre)
        posts.append(h)
    cache = ForwardCache(inputs, pres, posts, single, net.version, id(net))
    return (h[0] if single else h), cache


def predict(net, x):
    return forward(net, x)[0]


def backward(net, cache, output_grad):
    """Reverse pass. Returns ``(param_grads, input_grad)``.

    ``param_grads`` is ordered like :meth:`DenseNet.parameters`. For batched
    input the gradients are summed over the batch.
    """
    if cache.net_id != id(net) or cache.version != net.version:
        raise CtsError("stale forward cache: network changed since forward()")
    g = np.asarray(output_grad, dtype=np.float64)
    if cache.single:
        g = g[None, :]
    if g.shape != cache.post[-1].shape:
        raise ShapeError(f"output_grad shape {g.shape} != output shape {cache.post[-1].shape}")
    grads = [None] * (2 * len(net.layers))
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        g = _activation_grad(layer.activation, cache.pre[i], cache.post[i], g)
        grads[2 * i] = g.T @ cache.inputs[i]
        grads[2 * i + 1] = g.sum(axis=0)
        g = g @ layer.weight
    return grads, (g[0] if cache.single else g)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon_hat: float = 1e-8
    epochs: int = 1000
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        for name in ("learning_rate", "beta1", "beta2", "epsilon_hat", "epochs", "batch_size"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not (self.beta1 < 1 and self.beta2 < 1):
            raise ValueError("beta1 and beta2 must be < 1")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")


@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0

    @classmethod
    def zeros_like(cls, params):
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(params, grads, state, cfg):
    """One bias-corrected Adam update, applied in place.

    Non-finite gradients raise :class:`NonFiniteError` before anything is
    touched, so the caller's parameters and state stay as they were.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("params, grads and optimizer state disagree in length")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        if not np.isfinite(g).all():
            raise NonFiniteError("non-finite gradient; Adam step rejected")
    state.step += 1
    b1, b2 = cfg.beta1, cfg.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= cfg.learning_rate * (m / c1) / (np.sqrt(v / c2) + cfg.epsilon_hat)
    return params, state

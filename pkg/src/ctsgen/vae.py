"""Variational autoencoder over flattened fixed-length series.

Encoder and decoder are plain MLPs. The encoder emits ``2 * latent_dim``
numbers: the mean followed by the log-variance of a diagonal Gaussian.
Reconstruction error is the summed squared error, KL is taken against a
standard normal prior, and the trained objective is
``recon + kl_weight * kl`` averaged over a mini-batch.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .errors import NonFiniteError, ShapeError, TrainingDivergedError

log = logging.getLogger(__name__)


@dataclass
class VaeModel:
    encoder: nn.DenseNet
    decoder: nn.DenseNet
    latent_dim: int
    input_shape: tuple  # (T, d_r)
    kl_weight: float = 1.0

    def __post_init__(self):
        self.input_shape = tuple(int(s) for s in self.input_shape)
        flat = self.input_shape[0] * self.input_shape[1]
        if self.encoder.output_dim != 2 * self.latent_dim:
            raise ShapeError("encoder must output 2 * latent_dim values")
        if self.encoder.input_dim != flat or self.decoder.output_dim != flat:
            raise ShapeError("encoder input / decoder output must equal T * d_r")
        if self.decoder.input_dim != self.latent_dim:
            raise ShapeError("decoder input must equal latent_dim")

    @classmethod
    def build(cls, input_shape, latent_dim=16, hidden=(128, 128), kl_weight=1.0, seed=0,
              hidden_activation="relu"):
        rng = np.random.default_rng(seed)
        flat = int(input_shape[0]) * int(input_shape[1])
        acts = [hidden_activation] * len(hidden) + ["identity"]
        enc = nn.DenseNet.init([flat, *hidden, 2 * latent_dim], acts, rng)
        dec = nn.DenseNet.init([latent_dim, *hidden[::-1], flat], acts, rng)
        return cls(enc, dec, latent_dim, tuple(input_shape), kl_weight)

    def parameters(self):
        return self.encoder.parameters() + self.decoder.parameters()

    def copy(self):
        return VaeModel(self.encoder.copy(), self.decoder.copy(), self.latent_dim,
                        self.input_shape, self.kl_weight)

    def to_dict(self):
        return {
            "latent_dim": self.latent_dim,
            "input_shape": list(self.input_shape),
            "kl_weight": self.kl_weight,
            "encoder": self.encoder.to_dict(),
            "decoder": self.decoder.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(nn.DenseNet.from_dict(d["encoder"]), nn.DenseNet.from_dict(d["decoder"]),
                   int(d["latent_dim"]), tuple(d["input_shape"]), float(d["kl_weight"]))


@dataclass
class LatentCode:
    mu: np.ndarray
    log_var: np.ndarray
    z: np.ndarray
    noise: np.ndarray


def _flatten(model, x):
    x = np.asarray(x, dtype=np.float64)
    shape = model.input_shape
    if x.shape == shape:
        return x.reshape(-1), True
    if x.ndim == 3 and x.shape[1:] == shape:
        return x.reshape(len(x), -1), False
    raise ShapeError(f"expected series of shape {shape} (or a batch of them), got {x.shape}")


def encode(model, x):
    """Return ``(mu, log_var)`` for one series ``(T, d_r)`` or a batch ``(n, T, d_r)``."""
    flat, _ = _flatten(model, x)
    out = nn.predict(model.encoder, flat)
    d = model.latent_dim
    return out[..., :d].copy(), out[..., d:].copy()


def reparameterize(mu, log_var, noise=None, rng=None):
    mu = np.asarray(mu, dtype=np.float64)
    log_var = np.asarray(log_var, dtype=np.float64)
    if noise is None:
        noise = (rng or np.random.default_rng()).standard_normal(mu.shape)
    noise = np.asarray(noise, dtype=np.float64)
    if mu.shape != log_var.shape or mu.shape != noise.shape:
        raise ShapeError("mu, log_var and noise must have equal shapes")
    return mu + np.exp(0.5 * log_var) * noise


def decode(model, z):
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != model.latent_dim or z.ndim > 2:
        raise ShapeError(f"latent must have length {model.latent_dim}, got shape {z.shape}")
    out = nn.predict(model.decoder, z)
    if z.ndim == 1:
        return out.reshape(model.input_shape)
    return out.reshape((len(z),) + model.input_shape)


def kl_divergence(mu, log_var):
    """KL(N(mu, exp(log_var)) || N(0, I)); sums over the last axis."""
    mu = np.asarray(mu, dtype=np.float64)
    log_var = np.asarray(log_var, dtype=np.float64)
    if mu.shape != log_var.shape:
        raise ShapeError("mu and log_var must have equal shapes")
    # expm1 keeps the zero exact at log_var == 0
    return 0.5 * np.sum(mu * mu + np.expm1(log_var) - log_var, axis=-1)


def elbo_loss(model, x, noise, kl_weight=None):
    """``(recon, kl, total)`` for one series, or batch means for a batch."""
    total, recon, kl, _ = _elbo(model, x, noise, kl_weight, need_grad=False)
    return recon, kl, total


def elbo_grad(model, x, noise, kl_weight=None):
    """Loss triple plus gradients ordered like :meth:`VaeModel.parameters`."""
    total, recon, kl, grads = _elbo(model, x, noise, kl_weight, need_grad=True)
    return (recon, kl, total), grads


def _elbo(model, x, noise, kl_weight, need_grad):
    w = model.kl_weight if kl_weight is None else float(kl_weight)
    flat, single = _flatten(model, x)
    if single:
        flat = flat[None, :]
    noise = np.asarray(noise, dtype=np.float64).reshape(len(flat), model.latent_dim)
    batch = len(flat)
    d = model.latent_dim

    enc_out, enc_cache = nn.forward(model.encoder, flat)
    mu, log_var = enc_out[:, :d], enc_out[:, d:]
    std = np.exp(0.5 * log_var)
    z = mu + std * noise
    if not np.isfinite(z).all():
        raise NonFiniteError("non-finite latent sample")
    recon_x, dec_cache = nn.forward(model.decoder, z)
    diff = recon_x - flat
    recon = np.sum(diff * diff, axis=1)
    kl = kl_divergence(mu, log_var)
    recon_m, kl_m = float(recon.mean()), float(kl.mean())
    total = recon_m + w * kl_m
    if not np.isfinite(total):
        raise NonFiniteError("non-finite ELBO")
    if not need_grad:
        return total, recon_m, kl_m, None

    g_out = 2.0 * diff / batch
    dec_grads, g_z = nn.backward(model.decoder, dec_cache, g_out)
    g_mu = g_z + w * mu / batch
    g_lv = g_z * noise * 0.5 * std + w * 0.5 * np.expm1(log_var) / batch
    enc_grads, _ = nn.backward(model.encoder, enc_cache, np.concatenate([g_mu, g_lv], axis=1))
    return total, recon_m, kl_m, enc_grads + dec_grads


@dataclass
class TrainResult:
    model: VaeModel
    loss_trace: list = field(default_factory=list)  # per-epoch mean total loss
    recon_trace: list = field(default_factory=list)
    kl_trace: list = field(default_factory=list)


def train(model, series, cfg, log_every=0):
    """Fit ``model`` on ``series`` (n, T, d_r) with Adam; returns a new trained model.

    The input model is left untouched. Mini-batches come from a seeded
    shuffle each epoch and the final partial batch is kept.
    """
    series = np.asarray(series, dtype=np.float64)
    if series.ndim != 3 or len(series) == 0:
        raise ShapeError("training needs a non-empty (n, T, d_r) array")
    if series.shape[1:] != model.input_shape:
        raise ShapeError(f"series shape {series.shape[1:]} != model input {model.input_shape}")
    if not np.isfinite(series).all():
        raise NonFiniteError("training data contains non-finite values")

    model = model.copy()
    rng = np.random.default_rng(cfg.seed)
    params = model.parameters()
    state = nn.AdamState.zeros_like(params)
    n = len(series)
    result = TrainResult(model)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        tot = rec = kl = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            noise = rng.standard_normal((len(idx), model.latent_dim))
            try:
                (r, k, t), grads = elbo_grad(model, series[idx], noise)
                nn.adam_step(params, grads, state, cfg)
            except NonFiniteError as exc:
                raise TrainingDivergedError(epoch, f"training diverged at epoch {epoch}: {exc}") from exc
            model.encoder.version += 1
            model.decoder.version += 1
            tot += t * len(idx)
            rec += r * len(idx)
            kl += k * len(idx)
        result.loss_trace.append(tot / n)
        result.recon_trace.append(rec / n)
        result.kl_trace.append(kl / n)
        if log_every and (epoch + 1) % log_every == 0:
            log.info("epoch %d loss %.6f recon %.6f kl %.6f", epoch + 1, tot / n, rec / n, kl / n)
    return result


def reconstruct(model, x, noise=None):
    """encode -> reparameterize -> decode; ``noise=None`` is the deterministic mode."""
    mu, log_var = encode(model, x)
    if noise is None:
        noise = np.zeros_like(mu)
    return decode(model, reparameterize(mu, log_var, noise))

"""Independent reference computations used by several test modules."""

from __future__ import annotations

import itertools

import numpy as np

from ctsgen import vae


def elbo_fd_grads(model, x, noise, kl_weight=None, h=1e-4):
    """Central finite differences of the ELBO total w.r.t. every parameter."""
    params = model.parameters()
    out = []
    for p in params:
        gp = np.zeros_like(p)
        for i in np.ndindex(p.shape):
            old = p[i]
            p[i] = old + h
            model.encoder.version += 1
            model.decoder.version += 1
            up = vae.elbo_loss(model, x, noise, kl_weight)[2]
            p[i] = old - h
            model.encoder.version += 1
            model.decoder.version += 1
            dn = vae.elbo_loss(model, x, noise, kl_weight)[2]
            p[i] = old
            model.encoder.version += 1
            model.decoder.version += 1
            gp[i] = (up - dn) / (2 * h)
        out.append(gp)
    return out


def max_rel_err(a_list, n_list, floor=1e-6):
    worst = 0.0
    for a, n in zip(a_list, n_list):
        err = np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(err.max()))
    return worst


def warping_paths(n, m):
    """Every monotone, continuous warping path from (0,0) to (n-1,m-1)."""
    def walk(i, j):
        if (i, j) == (n - 1, m - 1):
            yield [(i, j)]
            return
        for di, dj in ((1, 0), (0, 1), (1, 1)):
            a, b = i + di, j + dj
            if a < n and b < m:
                for rest in walk(a, b):
                    yield [(i, j)] + rest
    yield from walk(0, 0)


def dtw_bruteforce(x, y):
    x = np.atleast_2d(np.asarray(x, float).T).T
    y = np.atleast_2d(np.asarray(y, float).T).T
    best = np.inf
    for path in warping_paths(len(x), len(y)):
        best = min(best, sum(float(np.sum((x[i] - y[j]) ** 2)) for i, j in path))
    return float(np.sqrt(best))


def auc_pairs(labels, scores):
    labels = np.asarray(labels, bool)
    pos, neg = np.asarray(scores)[labels], np.asarray(scores)[~labels]
    wins = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p, q in itertools.product(pos, neg))
    return wins / (len(pos) * len(neg))


def dcs_oracle(dists, k1):
    """Full sort: nearest ceil(k1/2), then furthest remaining, ties to lower id."""
    k = len(dists)
    near = sorted(range(k), key=lambda j: (dists[j], j))
    far = sorted(range(k), key=lambda j: (-dists[j], j))
    chosen = near[:(k1 + 1) // 2]
    for j in far:
        if len(chosen) == k1:
            break
        if j not in chosen:
            chosen.append(j)
    return chosen


def nns_oracle(z0, idx, latents, k2):
    scored = sorted(idx, key=lambda i: (float(np.sum((latents[i] - z0) ** 2)), i))
    return scored[:k2]


def waveform_benchmark(n_train=200, n_test=100, T=64, seed=0):
    """Sine/square/sawtooth with random amplitude, frequency and phase; labels are waveform ids."""
    from ctsgen import data
    spec = data.SynthSpec(length=T, n=n_train + n_test, amplitude=(0.5, 2.0), frequency=(1.0, 3.0),
                          phase=(0.0, 2 * np.pi), noise=0.1, waveforms=data.WAVEFORMS, seed=seed)
    ds = data.synth_generate(spec)
    y = ds.column("waveform").astype(int)
    return ds.series[:n_train], y[:n_train], ds.series[n_train:], y[n_train:]

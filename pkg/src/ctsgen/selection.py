"""Data selection: choose condition clusters, then latent nearest neighbours inside them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import clustering
from .errors import ConfigError, CtsError

STRATEGIES = ("dcs", "rand")


@dataclass
class SelectionConfig:
    k1: int
    k2: int
    strategy: str = "dcs"
    use_nns: bool = True  # False: k2 seeded-random members per cluster instead of nearest
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES + ("all",):
            raise ConfigError(f"unknown selection strategy {self.strategy!r}")
        if self.k1 < 1 or self.k2 < 1:
            raise ConfigError("k1 and k2 must be >= 1")


@dataclass
class SelectionResult:
    indices: np.ndarray
    conditions: np.ndarray  # C_s
    latents: np.ndarray  # M_s (encoder means)
    source_cluster: np.ndarray
    clusters: list  # selected cluster ids, selection order


def dcs(model, c0, k1):
    """Nearest ceil(k1/2) clusters to ``c0`` followed by the furthest floor(k1/2).

    Ties go to the lower cluster id on both sides.
    """
    if not 1 <= k1 <= model.k:
        raise ConfigError(f"k1={k1} must lie in [1, k={model.k}]")
    d = clustering.pairwise(np.asarray(c0, dtype=np.float64)[None, :], model.centers,
                            model.schema, model.gamma)[0]
    ids = np.arange(model.k)
    near = np.lexsort((ids, d))
    far = np.lexsort((ids, -d))
    n_near = (k1 + 1) // 2
    chosen = list(near[:n_near])
    taken = set(chosen)
    for j in far:
        if len(chosen) == k1:
            break
        if j not in taken:
            chosen.append(j)
            taken.add(j)
    return [int(j) for j in chosen]


def rand_select(model, k1, seed):
    if not 1 <= k1 <= model.k:
        raise ConfigError(f"k1={k1} must lie in [1, k={model.k}]")
    return [int(j) for j in np.random.default_rng(seed).choice(model.k, size=k1, replace=False)]


def nns(z0_mu, clusters, latents, members, k2):
    """Per selected cluster, the ``k2`` members whose mean latent is closest to ``z0_mu``.

    ``members[j]`` lists cluster ``j``'s dataset indices. Ties resolve to the
    lower dataset index.
    """
    z0_mu = np.asarray(z0_mu, dtype=np.float64)
    out = {}
    for j in clusters:
        idx = np.asarray(members[j])
        if idx.size and idx.max() >= len(latents):
            raise CtsError(f"no cached latent for dataset index {int(idx.max())}")
        diff = latents[idx] - z0_mu
        d = np.einsum("ij,ij->i", diff, diff)
        order = np.lexsort((idx, d))
        out[j] = idx[order[:k2]]
    return out


def select(mu0, c0, cluster_model, latents, conditions, cfg, members=None):
    """Cluster choice (DCS / Rand / all) composed with per-cluster neighbour search.

    ``mu0`` is the encoder mean of the input series, ``c0`` its (normalized)
    condition row; ``latents`` and ``conditions`` cover the training set.
    """
    if members is None:
        members = cluster_model.members()
    k1 = min(cfg.k1, cluster_model.k)
    if cfg.strategy == "dcs":
        chosen = dcs(cluster_model, c0, k1)
    elif cfg.strategy == "rand":
        chosen = rand_select(cluster_model, k1, cfg.seed)
    else:
        chosen = list(range(cluster_model.k))
    if cfg.use_nns:
        picked = nns(mu0, chosen, latents, members, cfg.k2)
    else:
        rng = np.random.default_rng(cfg.seed + 1)
        picked = {}
        for j in chosen:
            idx = np.asarray(members[j])
            picked[j] = np.sort(rng.permutation(idx)[:cfg.k2])
    idx = np.concatenate([picked[j] for j in chosen]) if chosen else np.empty(0, int)
    src = np.concatenate([np.full(len(picked[j]), j) for j in chosen]) if chosen else np.empty(0, int)
    if idx.size == 0:
        raise CtsError("data selection returned no series")
    return SelectionResult(idx.astype(np.int64), conditions[idx], latents[idx], src.astype(np.int64), chosen)

"""Piecewise-linear blending of mean latents along one numeric condition.

Inside the observed range the two tightest stored values around the
request are interpolated; outside it the two outermost values on that side
are extended linearly.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

import numpy as np

from .errors import CtsError

INTERP, EXTRAP_ABOVE, EXTRAP_BELOW, EXACT = "interp", "extrap_above", "extrap_below", "exact"


@dataclass(frozen=True)
class ConditionLatentPairs:
    values: tuple  # strictly increasing condition values
    latents: np.ndarray  # (len(values), d)

    @classmethod
    def from_pairs(cls, cs, mus):
        """Sort by condition value; repeated values collapse to their mean latent."""
        cs = np.asarray(cs, dtype=np.float64).ravel()
        mus = np.atleast_2d(np.asarray(mus, dtype=np.float64))
        if len(cs) != len(mus):
            raise CtsError("need one latent per condition value")
        uniq, inv = np.unique(cs, return_inverse=True)
        out = np.zeros((len(uniq), mus.shape[1]))
        np.add.at(out, inv, mus)
        out /= np.bincount(inv)[:, None]
        # single members keep their latent bit-for-bit
        for u in range(len(uniq)):
            hit = np.flatnonzero(inv == u)
            if len(hit) == 1:
                out[u] = mus[hit[0]]
        return cls(tuple(float(v) for v in uniq), out)

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class BlendWitness:
    mode: str
    left: float  # bracket condition values
    right: float
    coefficient: float  # alpha (interp), beta (above) or gamma (below); 0 for exact


def bracket(pairs, c0):
    """Locate ``c0`` among the stored values by binary search."""
    v = pairs.values
    if len(v) < 2:
        raise CtsError("bracketing needs at least two distinct condition values")
    c0 = float(c0)
    i = bisect.bisect_left(v, c0)
    if i < len(v) and v[i] == c0:
        return BlendWitness(EXACT, c0, c0, 0.0)
    if i == 0:
        # below range: c1 = v[0] (min), c1' = v[1]; gamma = (c0 - c1') / (c1 - c1')
        return BlendWitness(EXTRAP_BELOW, v[0], v[1], (c0 - v[1]) / (v[0] - v[1]))
    if i == len(v):
        # above range: c2' = v[-2], c2 = v[-1]; beta = (c0 - c2') / (c2 - c2')
        return BlendWitness(EXTRAP_ABOVE, v[-2], v[-1], (c0 - v[-2]) / (v[-1] - v[-2]))
    lo, hi = v[i - 1], v[i]
    return BlendWitness(INTERP, lo, hi, (c0 - lo) / (hi - lo))


def _latent(pairs, c):
    return pairs.latents[pairs.values.index(c)]


def interpolate(pairs, c0):
    w = bracket(pairs, c0)
    if w.mode == EXACT:
        return _latent(pairs, w.left).copy(), w
    if w.mode != INTERP:
        raise CtsError(f"c0'={c0} lies outside [{pairs.values[0]}, {pairs.values[-1]}]; use extrapolate")
    m1, m2 = _latent(pairs, w.left), _latent(pairs, w.right)
    return m1 + w.coefficient * (m2 - m1), w


def extrapolate(pairs, c0):
    w = bracket(pairs, c0)
    if w.mode == EXACT and float(c0) in (pairs.values[0], pairs.values[-1]):
        # boundary: coefficient 1 on the extreme pair
        if float(c0) == pairs.values[-1]:
            return _latent(pairs, c0).copy(), BlendWitness(EXTRAP_ABOVE, pairs.values[-2], pairs.values[-1], 1.0)
        return _latent(pairs, c0).copy(), BlendWitness(EXTRAP_BELOW, pairs.values[0], pairs.values[1], 1.0)
    if w.mode == EXTRAP_ABOVE:
        m_in, m_out = _latent(pairs, w.left), _latent(pairs, w.right)  # mu2', mu2
    elif w.mode == EXTRAP_BELOW:
        m_in, m_out = _latent(pairs, w.right), _latent(pairs, w.left)  # mu1', mu1
    else:
        raise CtsError(f"c0'={c0} lies inside the observed range; use interpolate")
    return m_in + w.coefficient * (m_out - m_in), w


def blend(pairs, c0):
    w = bracket(pairs, c0)
    if w.mode in (INTERP, EXACT):
        return interpolate(pairs, c0)
    return extrapolate(pairs, c0)

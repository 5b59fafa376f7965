"""Shared fixtures: the amplitude lab and small random nets."""

from __future__ import annotations

import numpy as np
import pytest

from ctsgen import data
from ctsgen import pipeline as P
from ctsgen.nn import TrainConfig

LAB_LEVELS = (0.5, 1.0, 2.0)
LAB_T = 32


def lab_dataset(n=600, seed=3, levels=LAB_LEVELS):
    """Sines with amplitude as the only visible condition; phase is a hidden factor."""
    spec = data.SynthSpec(length=LAB_T, n=n, amplitude=data.Factor(levels=levels), frequency=1.0,
                          phase=(0.0, 2 * np.pi), noise=0.05, seed=seed)
    return data.synth_generate(spec).project(["amplitude"])


def lab_config(**kw):
    base = dict(train=TrainConfig(epochs=300, seed=0), kl_weight=0.01, k=3, k1=2, k2=5,
                blend="bracketed-linear", exclude_above={"amplitude": 2.0})
    base.update(kw)
    return P.PipelineConfig(**base)


def peak_amplitude(x):
    """Half the peak-to-peak range."""
    x = np.ravel(x)
    return 0.5 * (x.max() - x.min())


@pytest.fixture(scope="session")
def lab():
    ds = lab_dataset()
    cfg = lab_config()
    train, val, test, _ = P.training_split(ds, cfg)
    bundle = P.train_phase(train, cfg)
    return {"dataset": ds, "config": cfg, "train": train, "val": val, "test": test, "bundle": bundle}


@pytest.fixture(scope="session")
def tiny_bundle():
    """Fast, barely trained bundle for plumbing tests."""
    ds = lab_dataset(n=120, seed=5)
    cfg = lab_config(train=TrainConfig(epochs=5, seed=0), hidden=(16,), latent_dim=4)
    train = P.training_split(ds, cfg)[0]
    return ds, cfg, P.train_phase(train, cfg)

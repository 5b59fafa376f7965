"""Training phase, on-the-fly generation, evaluation protocols, ablation and sweeps.

Conventions:

* A :class:`Bundle` keeps the trained VAE, the condition clusters, the
  normalization and the cached encoder means of every training series.
* Series and condition rows handed to the public functions are in raw
  units. Clustering and selection work on min-max normalized conditions;
  the mapping is fitted on raw conditions so explanations read in data
  units.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import clustering, latent, mapping, selection, vae
from .data import ConditionSchema, Dataset, Normalization, split_indices
from .mapping import VARIANTS as MAPPING_VARIANTS, TreeConfig
from .errors import BundleError, ConfigError, CtsError, NominalExtrapolationError, SchemaError
from .metrics import (EXTRAPOLATION, INTERPOLATION, EvalReport, accuracy, acd, auc, cfid, dtw,
                      ecod_fit, ecod_flag, ecod_score, ed, rocket_fit, rocket_predict,
                      validate_report, weighted_f1)
from .nn import TrainConfig

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
BLENDS = ("direct-regression", "bracketed-linear")


# -- configuration --------------------------------------------------------------

def default_k1(k):
    """Half of k rounded up, then up to the next even number, capped at k."""
    k1 = math.ceil(0.5 * k)
    k1 += k1 % 2
    return max(1, min(k1, k))


def default_k2(n, k):
    return max(1, math.ceil(0.5 * n / k))


@dataclass
class PipelineConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    latent_dim: int = 16
    hidden: tuple = (128, 128)
    kl_weight: float = 1.0
    k: int = 50
    k1: int | None = None  # None -> default_k1(k)
    k2: int | None = None  # None -> default_k2(n, k)
    strategy: str = "dcs"
    use_nns: bool = True
    mapping: str = "tree"
    tree: TreeConfig = field(default_factory=TreeConfig)
    blend: str = "direct-regression"
    deterministic: bool = True
    max_iterations: int = 100
    seed: int = 0
    # which rows of a dataset form the training split
    fractions: tuple = (0.7, 0.15, 0.15)
    split_seed: int = 0
    exclude_above: dict | None = None  # {slot: threshold}; rows above are held out as extremes

    def __post_init__(self):
        if isinstance(self.train, dict):
            self.train = TrainConfig(**self.train)
        if isinstance(self.tree, dict):
            self.tree = TreeConfig(**self.tree)
        self.hidden = tuple(int(h) for h in self.hidden)
        self.fractions = tuple(float(f) for f in self.fractions)
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.k1 is not None and not 1 <= self.k1 <= self.k:
            raise ConfigError(f"k1={self.k1} must lie in [1, k={self.k}]")
        if self.k2 is not None and self.k2 < 1:
            raise ConfigError("k2 must be >= 1")
        if self.strategy not in selection.STRATEGIES + ("all",):
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.mapping not in MAPPING_VARIANTS:
            raise ConfigError(f"unknown mapping variant {self.mapping!r}")
        if self.blend not in BLENDS:
            raise ConfigError(f"blend must be one of {BLENDS}")
        if self.latent_dim < 1:
            raise ConfigError("latent_dim must be >= 1")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown pipeline config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self):
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        d["fractions"] = list(self.fractions)
        return d


def training_split(dataset, cfg):
    """``(train, validation, test, extremes)`` under the config's split rule.

    Rows above any ``exclude_above`` threshold are removed before splitting
    and returned separately.
    """
    mask = np.zeros(len(dataset), dtype=bool)
    for name, thr in (cfg.exclude_above or {}).items():
        mask |= dataset.column(name) > thr
    normal = dataset.where(~mask)
    parts = split_indices(len(normal), cfg.fractions, cfg.split_seed)
    return tuple(normal.take(p) for p in parts) + (dataset.where(mask),)


# -- bundle ---------------------------------------------------------------------

@dataclass
class Bundle:
    vae: vae.VaeModel
    clusters: clustering.ClusterModel
    schema: ConditionSchema
    normalization: Normalization
    mu: np.ndarray  # (n, d_l) encoder means of the training series
    log_var: np.ndarray
    conditions: np.ndarray  # raw training condition rows
    conditions_norm: np.ndarray
    config: PipelineConfig
    ids: list = field(default_factory=list)
    loss_trace: list = field(default_factory=list)
    _members: list | None = field(default=None, repr=False, compare=False)

    @property
    def n(self):
        return len(self.mu)

    @property
    def members(self):
        if self._members is None:
            self._members = self.clusters.members()
        return self._members

    def to_dict(self):
        return {
            "format_version": FORMAT_VERSION,
            "vae": self.vae.to_dict(),
            "clusters": self.clusters.to_dict(),
            "schema": self.schema.to_dict(),
            "normalization": self.normalization.to_dict(),
            "latents": {"mu": self.mu.tolist(), "log_var": self.log_var.tolist()},
            "conditions": self.conditions.tolist(),
            "conditions_norm": self.conditions_norm.tolist(),
            "config": self.config.to_dict(),
            "ids": list(self.ids),
            "loss_trace": list(self.loss_trace),
        }

    @classmethod
    def from_dict(cls, d):
        version = d.get("format_version")
        if version != FORMAT_VERSION:
            raise BundleError(f"bundle format_version {version!r} is not supported (expected {FORMAT_VERSION})")
        required = ("vae", "clusters", "schema", "normalization", "latents", "conditions",
                    "conditions_norm", "config")
        missing = [k for k in required if k not in d]
        if missing:
            raise BundleError(f"bundle is missing component(s): {', '.join(missing)}")
        try:
            schema = ConditionSchema.from_dict(d["schema"])
            out = cls(
                vae.VaeModel.from_dict(d["vae"]),
                clustering.ClusterModel.from_dict(d["clusters"], schema),
                schema,
                Normalization.from_dict(d["normalization"]),
                np.asarray(d["latents"]["mu"], dtype=np.float64),
                np.asarray(d["latents"]["log_var"], dtype=np.float64),
                np.asarray(d["conditions"], dtype=np.float64),
                np.asarray(d["conditions_norm"], dtype=np.float64),
                PipelineConfig.from_dict(d["config"]),
                list(d.get("ids", [])),
                list(d.get("loss_trace", [])),
            )
        except (KeyError, TypeError) as exc:
            raise BundleError(f"malformed bundle: {exc!r}") from None
        if not (len(out.mu) == len(out.log_var) == len(out.conditions) == len(out.clusters.assignment)):
            raise BundleError("bundle components disagree on the number of training series")
        return out


def bundle_bytes(bundle):
    return json.dumps(bundle.to_dict(), sort_keys=True, separators=(",", ":")).encode()


def bundle_hash(bundle):
    return hashlib.sha256(bundle_bytes(bundle)).hexdigest()


def save_bundle(bundle, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(bundle_bytes(bundle))
    return path


def load_bundle(path):
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise BundleError(f"bundle {path} is not valid JSON: {exc}") from None
    if not isinstance(d, dict):
        raise BundleError("bundle root must be a JSON object")
    return Bundle.from_dict(d)


# -- training phase ---------------------------------------------------------------

def train_phase(dataset, cfg=None):
    """Fit the VAE and the condition clusters, and cache every training mean latent."""
    cfg = cfg or PipelineConfig()
    if len(dataset) == 0:
        raise CtsError("cannot train on an empty dataset")
    norm_ds, meta = _normalized(dataset)
    model = vae.VaeModel.build(dataset.shape, cfg.latent_dim, cfg.hidden, cfg.kl_weight, cfg.seed)
    result = vae.train(model, norm_ds.series, cfg.train)
    mu, lv = vae.encode(result.model, norm_ds.series)

    n_distinct = len(np.unique(norm_ds.conditions, axis=0))
    k = cfg.k
    if k > n_distinct:
        log.warning("k=%d exceeds the %d distinct condition vectors; using k=%d", k, n_distinct, n_distinct)
        k = n_distinct
    cm = clustering.fit(norm_ds.conditions, dataset.schema, k, cfg.max_iterations, cfg.seed)
    cfg = replace(cfg, k=k, k1=None if cfg.k1 is None else min(cfg.k1, k))
    return Bundle(result.model, cm, dataset.schema, meta, mu, lv, dataset.conditions.copy(),
                  norm_ds.conditions, cfg, list(dataset.ids), [float(v) for v in result.loss_trace])


def _normalized(dataset):
    from .data import normalize
    return normalize(dataset)


def embed(bundle, series):
    """Encoder means of raw series; the embedding used for C-FID."""
    x = bundle.normalization.apply_series(np.asarray(series, dtype=np.float64))
    return vae.encode(bundle.vae, x)[0]


# -- generation --------------------------------------------------------------------

@dataclass
class GenerationRequest:
    x0: np.ndarray  # (T, d_r) raw
    c0: object  # condition row (codes), list of tokens, or {name: value}
    c0_prime: object
    options: dict = field(default_factory=dict)


OPTION_KEYS = {"strategy", "use_nns", "k1", "k2", "mapping", "blend", "deterministic", "noise_seed", "seed"}


def _row(schema, c):
    if isinstance(c, np.ndarray) and c.dtype.kind == "f":
        return schema.validate_rows(c[None, :])[0]
    return schema.encode(c)


def _settings(bundle, options):
    bad = set(options) - OPTION_KEYS
    if bad:
        raise ConfigError(f"unknown generation options: {sorted(bad)}")
    cfg = bundle.config
    k = bundle.clusters.k
    s = {
        "strategy": cfg.strategy, "use_nns": cfg.use_nns, "mapping": cfg.mapping,
        "blend": cfg.blend, "deterministic": cfg.deterministic, "seed": cfg.seed,
        "k1": cfg.k1 if cfg.k1 is not None else default_k1(k),
        "k2": cfg.k2 if cfg.k2 is not None else default_k2(bundle.n, k),
        "noise_seed": cfg.seed,
    }
    s.update(options)
    s["k1"] = min(int(s["k1"]), k)
    s["k2"] = int(s["k2"])
    if s["blend"] not in BLENDS:
        raise ConfigError(f"blend must be one of {BLENDS}")
    return s


def _check_nominal(bundle, c0, c1):
    for j, slot in enumerate(bundle.schema.slots):
        if slot.is_numeric or slot.ordinal or c0[j] == c1[j]:
            continue
        if not np.any(bundle.conditions[:, j] == c1[j]):
            raise NominalExtrapolationError(
                f"{slot.name}={slot.vocabulary[int(c1[j])]!r} never occurs in training data; "
                "a nominal category cannot be extrapolated")


def _blend(bundle, f, rows, c0, c1, how):
    """Returns ``(mu0', witness dict or None)``."""
    changed = np.flatnonzero(c0 != c1)
    if how == "direct-regression" or len(changed) != 1:
        return mapping.predict(f, c1), None
    j = int(changed[0])
    values = np.unique(rows[:, j])
    if len(values) < 2:
        return mapping.predict(f, c1), {"mode": "fallback-direct", "slot": bundle.schema.names[j]}
    grid = np.repeat(c1[None, :], len(values), axis=0)
    grid[:, j] = values
    pairs = latent.ConditionLatentPairs.from_pairs(values, mapping.predict(f, grid))
    mu, w = latent.blend(pairs, c1[j])
    return mu, {"mode": w.mode, "slot": bundle.schema.names[j], "left": w.left,
                "right": w.right, "coefficient": w.coefficient}


def _select(bundle, mu0, c0_norm, s):
    k2 = s["k2"]
    strategy = s["strategy"]
    if strategy == "all":
        k1 = bundle.clusters.k
    else:
        k1 = s["k1"]
    cfg = selection.SelectionConfig(k1, k2, strategy, s["use_nns"], s["seed"])
    return selection.select(mu0, c0_norm, bundle.clusters, bundle.mu, bundle.conditions_norm,
                            cfg, bundle.members)


def generate(bundle, req):
    """Produce ``x0'`` for ``req`` and the provenance record behind it.

    Steps: encode x0, select X_s, fit the mapping on X_s, predict (or
    blend) mu0', sample z0', decode. The bundle is only read.
    """
    t_start = time.perf_counter()
    schema = bundle.schema
    c0 = _row(schema, req.c0)
    c1 = _row(schema, req.c0_prime)
    _check_nominal(bundle, c0, c1)
    s = _settings(bundle, req.options)

    x0 = np.asarray(req.x0, dtype=np.float64)
    if x0.ndim == 1:
        x0 = x0[:, None]
    mu0, lv0 = vae.encode(bundle.vae, bundle.normalization.apply_series(x0))
    c0_norm = bundle.normalization.apply_conditions(c0[None, :])[0]

    sel = _select(bundle, mu0, c0_norm, s)
    tree_cfg = replace(bundle.config.tree, seed=s["seed"])
    rows = bundle.conditions[sel.indices]
    f = mapping.fit(rows, sel.latents, schema, s["mapping"], tree_cfg)
    mu1, witness = _blend(bundle, f, rows, c0, c1, s["blend"])

    noise = None
    if not s["deterministic"]:
        noise = np.random.default_rng(s["noise_seed"]).standard_normal(len(mu1))
    z1 = mapping.sample_latent(mu1, lv0, noise)
    x1 = bundle.normalization.invert_series(vae.decode(bundle.vae, z1))
    elapsed = time.perf_counter() - t_start

    provenance = {
        "c0": schema.decode(c0),
        "c0_prime": schema.decode(c1),
        "selected_clusters": [int(j) for j in sel.clusters],
        "selected_indices": sel.indices.tolist(),
        "source_clusters": sel.source_cluster.tolist(),
        "n_selected": int(len(sel.indices)),
        "mapping": {"variant": f.variant, "train_loss": f.train_loss, "n_train": f.n_train},
        "blend": {"strategy": s["blend"], "witness": witness},
        "settings": {k: s[k] for k in sorted(s)},
        "z0_prime": z1.tolist(),
        "elapsed_ms": 1000.0 * elapsed,
    }
    return x1, provenance


def explain_request(bundle, req):
    """Fit the mapping a request would use and return its rules and importances."""
    schema = bundle.schema
    c0 = _row(schema, req.c0)
    s = _settings(bundle, req.options)
    x0 = np.asarray(req.x0, dtype=np.float64)
    if x0.ndim == 1:
        x0 = x0[:, None]
    mu0, _ = vae.encode(bundle.vae, bundle.normalization.apply_series(x0))
    c0_norm = bundle.normalization.apply_conditions(c0[None, :])[0]
    sel = _select(bundle, mu0, c0_norm, s)
    f = mapping.fit(bundle.conditions[sel.indices], sel.latents, schema, s["mapping"],
                    replace(bundle.config.tree, seed=s["seed"]))
    return mapping.explain(f), sel


# -- evaluation -------------------------------------------------------------------

@dataclass
class ProtocolConfig:
    target: str = "amplitude"
    n_samples: int = 64
    seed: int = 0
    num_kernels: int = 1000
    extreme_value: float | None = None  # extrapolation target; default 1.5 x threshold
    ecod_quantile: float = 0.95
    max_classes: int = 20
    inputs_from: list | None = None  # draw generation inputs only from rows whose target is listed

    def __post_init__(self):
        if self.n_samples < 1:
            raise ConfigError("n_samples must be >= 1")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown protocol keys: {sorted(unknown)}")
        return cls(**d)


def _pair_metrics(inputs, outputs):
    eds = [ed(a, b) for a, b in zip(inputs, outputs)]
    dtws = [dtw(a, b) for a, b in zip(inputs, outputs)]
    acds = [acd(a, b) for a, b in zip(inputs, outputs)]
    return float(np.mean(eds)), float(np.mean(dtws)), float(np.mean(acds))


def _safe_cfid(bundle, real, gen):
    if len(real) < 2 or len(gen) < 2:
        return 0.0
    return cfid(embed(bundle, real), embed(bundle, gen))


@dataclass
class InterpContext:
    """Everything the interpolation protocol needs that does not depend on the generator."""

    train: Dataset
    validation: Dataset
    test: Dataset
    classes: np.ndarray
    rocket: object
    protocol: ProtocolConfig
    slot: int


def interp_context(bundle, dataset, protocol):
    train, val, test, _ = training_split(dataset, bundle.config)
    slot = dataset.schema.index(protocol.target)
    labels = train.conditions[:, slot]
    classes = np.unique(labels)
    if len(classes) < 2 or len(classes) > protocol.max_classes:
        raise ConfigError(f"{protocol.target!r} has {len(classes)} distinct training values; "
                          f"the classifier needs 2..{protocol.max_classes}")
    if len(val) == 0 or len(test) == 0:
        raise ConfigError("validation and test splits must be non-empty")
    rk = rocket_fit(train.series, labels, protocol.num_kernels, protocol.seed)
    return InterpContext(train, val, test, classes, rk, protocol, slot)


def _config_echo(bundle, protocol, extra=None):
    echo = {"pipeline": bundle.config.to_dict(), "protocol": asdict(protocol)}
    echo.update(extra or {})
    return echo


def interp_baseline(bundle, ctx):
    """Validation row: real held-out series scored by the same measures."""
    rng = np.random.default_rng(ctx.protocol.seed)
    val = ctx.validation
    labels = val.conditions[:, ctx.slot]
    preds, _ = rocket_predict(ctx.rocket, val.series)
    train_labels = ctx.train.conditions[:, ctx.slot]
    partners = []
    for y in labels:
        pool = np.flatnonzero(train_labels == y)
        partners.append(ctx.train.series[rng.choice(pool)] if pool.size else ctx.train.series[rng.integers(len(ctx.train))])
    ed_m, dtw_m, acd_m = _pair_metrics(val.series, partners)
    report = EvalReport(
        INTERPOLATION, "validation",
        {"ed_mean": ed_m, "dtw_mean": dtw_m},
        {"cfid": _safe_cfid(bundle, ctx.train.series, val.series), "acd_mean": acd_m},
        {"acc": accuracy(labels, preds), "weighted_f1": weighted_f1(labels, preds)},
        {"pairs": len(val), "train": len(ctx.train)},
        _config_echo(bundle, ctx.protocol, {"ridge_lambda": ctx.rocket.ridge_lambda}),
    )
    validate_report(report.to_dict())
    return report


def _sample_inputs(ds, n, rng, protocol, slot):
    pool = np.arange(len(ds))
    if protocol.inputs_from is not None:
        pool = pool[np.isin(ds.conditions[:, slot], np.asarray(protocol.inputs_from, dtype=np.float64))]
    if pool.size == 0:
        raise ConfigError("no test rows match inputs_from")
    return rng.choice(pool, size=n, replace=pool.size < n)


def interp_generated(bundle, ctx, options=None, variant="CTS"):
    options = dict(options or {})
    rng = np.random.default_rng(ctx.protocol.seed + 1)
    test = ctx.test
    pick = _sample_inputs(test, ctx.protocol.n_samples, rng, ctx.protocol, ctx.slot)
    inputs, outputs, targets, reals, sizes = [], [], [], [], []
    train_labels = ctx.train.conditions[:, ctx.slot]
    for i in pick:
        c0 = test.conditions[i]
        others = ctx.classes[ctx.classes != c0[ctx.slot]]
        target = float(rng.choice(others if others.size else ctx.classes))
        c1 = c0.copy()
        c1[ctx.slot] = target
        x1, prov = generate(bundle, GenerationRequest(test.series[i], c0, c1, options))
        inputs.append(test.series[i])
        outputs.append(x1)
        targets.append(target)
        reals.append(ctx.train.series[rng.choice(np.flatnonzero(train_labels == target))])
        sizes.append(prov["n_selected"])
    preds, _ = rocket_predict(ctx.rocket, np.asarray(outputs))
    ed_m, dtw_m, acd_m = _pair_metrics(inputs, outputs)
    targets = np.asarray(targets)
    report = EvalReport(
        INTERPOLATION, variant,
        {"ed_mean": ed_m, "dtw_mean": dtw_m},
        {"cfid": _safe_cfid(bundle, np.asarray(reals), np.asarray(outputs)), "acd_mean": acd_m},
        {"acc": accuracy(targets, preds), "weighted_f1": weighted_f1(targets, preds)},
        {"pairs": len(pick), "train": len(ctx.train), "selected_max": max(sizes)},
        _config_echo(bundle, ctx.protocol, {"options": options,
                                            "ridge_lambda": ctx.rocket.ridge_lambda}),
    )
    validate_report(report.to_dict())
    return report


def evaluate_interpolation(bundle, dataset, protocol=None, options=None, include_generated=True):
    """Returns ``[validation report, generated report]`` (the latter unless disabled)."""
    protocol = protocol or ProtocolConfig()
    ctx = interp_context(bundle, dataset, protocol)
    reports = [interp_baseline(bundle, ctx)]
    if include_generated:
        reports.append(interp_generated(bundle, ctx, options))
    return reports


@dataclass
class ExtrapContext:
    train: Dataset
    validation: Dataset
    test: Dataset
    extremes: Dataset
    ecod: object
    protocol: ProtocolConfig
    slot: int
    threshold: float
    target_value: float


def extrap_context(bundle, dataset, protocol):
    cfg = bundle.config
    if not cfg.exclude_above or protocol.target not in cfg.exclude_above:
        raise ConfigError(f"extrapolation needs exclude_above[{protocol.target!r}] in the pipeline config")
    threshold = float(cfg.exclude_above[protocol.target])
    slot = dataset.schema.index(protocol.target)
    if bundle.schema.slots[bundle.schema.index(protocol.target)].is_numeric is False:
        raise NominalExtrapolationError("extrapolation target must be numeric")
    if bundle.conditions[:, bundle.schema.index(protocol.target)].max() > threshold:
        raise ConfigError("bundle was trained on rows above the extrapolation threshold")
    train, val, test, extremes = training_split(dataset, cfg)
    if len(val) == 0 or len(test) == 0:
        raise ConfigError("validation and test splits must be non-empty")
    value = protocol.extreme_value if protocol.extreme_value is not None else 1.5 * threshold
    det = ecod_fit(train.series, protocol.ecod_quantile)
    return ExtrapContext(train, val, test, extremes, det, protocol, slot, threshold, float(value))


def extrap_baseline(bundle, ctx):
    """Held-out normals against real extremes, when any exist."""
    if len(ctx.extremes) == 0:
        raise ConfigError("the dataset has no rows above the threshold for a validation row")
    val, ext = ctx.validation, ctx.extremes
    X = np.concatenate([val.series, ext.series])
    labels = np.r_[np.zeros(len(val), bool), np.ones(len(ext), bool)]
    flags = ecod_flag(ctx.ecod, X)
    rng = np.random.default_rng(ctx.protocol.seed)
    partners = ctx.train.series[rng.choice(len(ctx.train), size=len(ext))]
    ed_m, dtw_m, acd_m = _pair_metrics(partners, ext.series)
    report = EvalReport(
        EXTRAPOLATION, "validation",
        {"ed_mean": ed_m, "dtw_mean": dtw_m},
        {"cfid": _safe_cfid(bundle, ctx.train.series, ext.series), "acd_mean": acd_m},
        {"acc": accuracy(labels, flags), "auc": auc(labels, ecod_score(ctx.ecod, X))},
        {"pairs": len(ext), "normal": len(val), "extreme": len(ext)},
        _config_echo(bundle, ctx.protocol, {"threshold": ctx.threshold,
                                            "ecod_threshold": ctx.ecod.threshold}),
    )
    validate_report(report.to_dict())
    return report


def extrap_generated(bundle, ctx, options=None, variant="CTS"):
    options = dict(options or {})
    rng = np.random.default_rng(ctx.protocol.seed + 1)
    test = ctx.test
    pick = _sample_inputs(test, ctx.protocol.n_samples, rng, ctx.protocol, ctx.slot)
    inputs, outputs = [], []
    for i in pick:
        c0 = test.conditions[i]
        c1 = c0.copy()
        c1[ctx.slot] = ctx.target_value
        x1, _ = generate(bundle, GenerationRequest(test.series[i], c0, c1, options))
        inputs.append(test.series[i])
        outputs.append(x1)
    gen = np.asarray(outputs)
    X = np.concatenate([ctx.validation.series, gen])
    labels = np.r_[np.zeros(len(ctx.validation), bool), np.ones(len(gen), bool)]
    ed_m, dtw_m, acd_m = _pair_metrics(inputs, outputs)
    ref = ctx.extremes.series if len(ctx.extremes) >= 2 else ctx.train.series
    report = EvalReport(
        EXTRAPOLATION, variant,
        {"ed_mean": ed_m, "dtw_mean": dtw_m},
        {"cfid": _safe_cfid(bundle, ref, gen), "acd_mean": acd_m},
        {"acc": accuracy(labels, ecod_flag(ctx.ecod, X)), "auc": auc(labels, ecod_score(ctx.ecod, X))},
        {"pairs": len(pick), "normal": len(ctx.validation), "generated": len(gen)},
        _config_echo(bundle, ctx.protocol, {
            "options": options, "threshold": ctx.threshold, "target_value": ctx.target_value,
            "ecod_threshold": ctx.ecod.threshold,
            "cfid_reference": "extremes" if len(ctx.extremes) >= 2 else "train",
        }),
    )
    validate_report(report.to_dict())
    return report


def evaluate_extrapolation(bundle, dataset, protocol=None, options=None, include_generated=True):
    protocol = protocol or ProtocolConfig()
    ctx = extrap_context(bundle, dataset, protocol)
    reports = []
    if len(ctx.extremes) or not include_generated:
        reports.append(extrap_baseline(bundle, ctx))
    if include_generated:
        reports.append(extrap_generated(bundle, ctx, options))
    return reports


# -- ablation and sweeps -------------------------------------------------------------

ABLATION_VARIANTS = {
    "CTS": {"strategy": "dcs", "use_nns": True},
    "CTS-NNS": {"strategy": "dcs", "use_nns": False},
    "CTS-DCS": {"strategy": "rand", "use_nns": True},
    "CTS-NNS-DCS": {"strategy": "all", "k2": None},  # k2 filled with n: whole training set
    "Rand-LR": {"strategy": "rand", "mapping": "linear"},
    "Rand-RF": {"strategy": "rand", "mapping": "forest"},
    "Rand-DT": {"strategy": "rand", "mapping": "tree"},
    "DCS-LR": {"strategy": "dcs", "mapping": "linear"},
    "DCS-RF": {"strategy": "dcs", "mapping": "forest"},
    "DCS-DT": {"strategy": "dcs", "mapping": "tree"},
}


def variant_options(bundle, name):
    if name not in ABLATION_VARIANTS:
        raise ConfigError(f"unknown ablation variant {name!r}; choose from {sorted(ABLATION_VARIANTS)}")
    opts = dict(ABLATION_VARIANTS[name])
    if "k2" in opts and opts["k2"] is None:
        opts["k2"] = bundle.n
    return opts


def ablate(dataset, cfg, protocol=None, variants=None, scenario=INTERPOLATION, bundle=None):
    """One report per variant, sharing a single trained bundle and probe."""
    protocol = protocol or ProtocolConfig()
    variants = list(variants or ABLATION_VARIANTS)
    if bundle is None:
        bundle = train_phase(training_split(dataset, cfg)[0], cfg)
    if scenario == INTERPOLATION:
        ctx = interp_context(bundle, dataset, protocol)
        run = interp_generated
    elif scenario == EXTRAPOLATION:
        ctx = extrap_context(bundle, dataset, protocol)
        run = extrap_generated
    else:
        raise ConfigError(f"unknown scenario {scenario!r}")
    return [run(bundle, ctx, variant_options(bundle, name), name) for name in variants]


SWEEP_COLUMNS = ("k", "k1_ratio", "k2_ratio", "k1", "k2", "seed", "acc", "weighted_f1", "auc",
                 "ed_mean", "dtw_mean", "cfid", "acd_mean")


def sweep(dataset, cfg, ks, k1_ratios, k2_ratios, protocol=None, scenario=INTERPOLATION, bundle=None):
    """Metric surface over (k, k1/k, k2/|X_c|). The VAE is trained once; clusters are refit per k.

    |X_c| is the mean cluster size n/k. Each cell logs its seed.
    """
    protocol = protocol or ProtocolConfig()
    if bundle is None:
        bundle = train_phase(training_split(dataset, cfg)[0], cfg)
    if scenario == INTERPOLATION:
        ctx = interp_context(bundle, dataset, protocol)
        run = interp_generated
    elif scenario == EXTRAPOLATION:
        ctx = extrap_context(bundle, dataset, protocol)
        run = extrap_generated
    else:
        raise ConfigError(f"unknown scenario {scenario!r}")
    n_distinct = len(np.unique(bundle.conditions_norm, axis=0))
    rows = []
    for k in ks:
        k_eff = min(int(k), n_distinct)
        cm = clustering.fit(bundle.conditions_norm, bundle.schema, k_eff, cfg.max_iterations, cfg.seed)
        b = replace(bundle, clusters=cm, config=replace(bundle.config, k=k_eff, k1=None), _members=None)
        for r1 in k1_ratios:
            for r2 in k2_ratios:
                k1 = max(1, min(k_eff, round(r1 * k_eff)))
                k2 = max(1, math.ceil(r2 * b.n / k_eff))
                opts = {"k1": k1, "k2": k2}
                rep = run(b, ctx, opts, f"k={k_eff},k1={k1},k2={k2}")
                row = {"k": k_eff, "k1_ratio": r1, "k2_ratio": r2, "k1": k1, "k2": k2,
                       "seed": cfg.seed}
                flat = rep.flat()
                row.update({c: flat.get(c, float("nan")) for c in SWEEP_COLUMNS if c not in row})
                rows.append(row)
    return rows

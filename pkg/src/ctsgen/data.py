"""Datasets of condition-labelled series: schema, CSV I/O, normalization,
splits and a synthetic waveform generator with known ground-truth factors.

Condition vectors are stored as float rows. Numeric slots hold their value,
categorical slots hold the integer index of the token in the slot's
vocabulary. :class:`ConditionSchema` converts between tokens and codes.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DataFormatError, SchemaError, ShapeError

NUMERIC = "numeric"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class Slot:
    name: str
    kind: str = NUMERIC
    vocabulary: tuple = ()
    ordinal: bool = False  # categorical only: vocabulary order is meaningful

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise SchemaError(f"slot {self.name!r}: kind must be numeric or categorical")
        if self.kind == CATEGORICAL:
            vocab = tuple(str(v) for v in self.vocabulary)
            if not vocab:
                raise SchemaError(f"slot {self.name!r}: empty vocabulary")
            if len(set(vocab)) != len(vocab):
                raise SchemaError(f"slot {self.name!r}: duplicate vocabulary entries")
            object.__setattr__(self, "vocabulary", vocab)

    @property
    def is_numeric(self):
        return self.kind == NUMERIC


@dataclass(frozen=True)
class ConditionSchema:
    slots: tuple
    channels: int = 1

    def __post_init__(self):
        slots = tuple(self.slots)
        if not slots:
            raise SchemaError("schema needs at least one slot")
        names = [s.name for s in slots]
        if len(set(names)) != len(names):
            raise SchemaError("slot names must be unique")
        object.__setattr__(self, "slots", slots)

    @property
    def m(self):
        return len(self.slots)

    @property
    def names(self):
        return [s.name for s in self.slots]

    @property
    def numeric_mask(self):
        return np.array([s.is_numeric for s in self.slots])

    def index(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise SchemaError(f"unknown condition {name!r}") from None

    def encode(self, values):
        """Tokens/numbers (sequence or mapping by name) -> float row."""
        if isinstance(values, dict):
            missing = set(self.names) - set(values)
            if missing:
                raise SchemaError(f"missing conditions: {sorted(missing)}")
            values = [values[n] for n in self.names]
        values = list(values)
        if len(values) != self.m:
            raise SchemaError(f"expected {self.m} condition values, got {len(values)}")
        row = np.empty(self.m)
        for j, (slot, v) in enumerate(zip(self.slots, values)):
            if slot.is_numeric:
                try:
                    row[j] = float(v)
                except (TypeError, ValueError):
                    raise SchemaError(f"slot {slot.name!r}: {v!r} is not numeric") from None
                if not math.isfinite(row[j]):
                    raise SchemaError(f"slot {slot.name!r}: non-finite value")
            else:
                token = str(v)
                if token not in slot.vocabulary:
                    raise SchemaError(f"slot {slot.name!r}: {token!r} not in vocabulary")
                row[j] = slot.vocabulary.index(token)
        return row

    def decode(self, row):
        out = {}
        for slot, v in zip(self.slots, row):
            out[slot.name] = float(v) if slot.is_numeric else slot.vocabulary[int(v)]
        return out

    def validate_rows(self, rows):
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] != self.m:
            raise SchemaError(f"condition rows must have shape (n, {self.m})")
        if not np.isfinite(rows).all():
            raise SchemaError("non-finite condition value")
        for j, slot in enumerate(self.slots):
            if not slot.is_numeric:
                col = rows[:, j]
                if np.any(col != np.round(col)) or col.min(initial=0) < 0 or col.max(initial=0) >= len(slot.vocabulary):
                    raise SchemaError(f"slot {slot.name!r}: invalid category code")
        return rows

    def to_dict(self):
        out = []
        for s in self.slots:
            d = {"name": s.name, "kind": s.kind}
            if not s.is_numeric:
                d["vocabulary"] = list(s.vocabulary)
                if s.ordinal:
                    d["ordinal"] = True
            out.append(d)
        return {"channels": self.channels, "conditions": out}

    @classmethod
    def from_dict(cls, d):
        try:
            slots = [Slot(c["name"], c.get("kind", NUMERIC), tuple(c.get("vocabulary", ())),
                          bool(c.get("ordinal", False))) for c in d["conditions"]]
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed schema: {exc}") from None
        return cls(tuple(slots), int(d.get("channels", 1)))

    def fingerprint(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def subset(self, names):
        return ConditionSchema(tuple(self.slots[self.index(n)] for n in names), self.channels)


@dataclass
class Normalization:
    """Per-channel and per-numeric-slot min/max, kept for inversion."""

    series_min: np.ndarray
    series_max: np.ndarray
    cond_min: np.ndarray  # NaN for categorical slots
    cond_max: np.ndarray

    @staticmethod
    def _scale(lo, hi):
        span = hi - lo
        return np.where(span > 0, span, 0.0)

    def apply_series(self, x):
        span = self._scale(self.series_min, self.series_max)
        safe = np.where(span > 0, span, 1.0)
        return np.where(span > 0, (np.asarray(x) - self.series_min) / safe, 0.0)

    def invert_series(self, x):
        span = self._scale(self.series_min, self.series_max)
        return np.asarray(x) * span + self.series_min

    def apply_conditions(self, rows):
        rows = np.array(rows, dtype=np.float64, copy=True)
        num = ~np.isnan(self.cond_min)
        span = self._scale(self.cond_min[num], self.cond_max[num])
        safe = np.where(span > 0, span, 1.0)
        rows[..., num] = np.where(span > 0, (rows[..., num] - self.cond_min[num]) / safe, 0.0)
        return rows

    def invert_conditions(self, rows):
        rows = np.array(rows, dtype=np.float64, copy=True)
        num = ~np.isnan(self.cond_min)
        span = self._scale(self.cond_min[num], self.cond_max[num])
        rows[..., num] = rows[..., num] * span + self.cond_min[num]
        return rows

    def to_dict(self):
        def lst(a):
            return [None if np.isnan(v) else float(v) for v in a]

        return {"series_min": lst(self.series_min), "series_max": lst(self.series_max),
                "cond_min": lst(self.cond_min), "cond_max": lst(self.cond_max)}

    @classmethod
    def from_dict(cls, d):
        def arr(v):
            return np.array([np.nan if x is None else x for x in v], dtype=np.float64)

        return cls(arr(d["series_min"]), arr(d["series_max"]), arr(d["cond_min"]), arr(d["cond_max"]))


@dataclass
class Dataset:
    series: np.ndarray  # (n, T, d_r)
    conditions: np.ndarray  # (n, m) encoded
    schema: ConditionSchema
    normalization: Normalization | None = None
    ids: list | None = None

    def __post_init__(self):
        self.series = np.asarray(self.series, dtype=np.float64)
        if self.series.ndim == 2:
            self.series = self.series[:, :, None]
        if self.series.ndim != 3:
            raise ShapeError("series must be (n, T, d_r)")
        self.conditions = self.schema.validate_rows(self.conditions)
        if len(self.series) != len(self.conditions):
            raise DataFormatError(
                f"{len(self.series)} series but {len(self.conditions)} condition rows")
        if not np.isfinite(self.series).all():
            raise DataFormatError("series contain non-finite values")
        if self.ids is None:
            self.ids = [str(i) for i in range(len(self.series))]

    def __len__(self):
        return len(self.series)

    @property
    def shape(self):
        return self.series.shape[1:]

    def take(self, idx):
        idx = np.asarray(idx, dtype=int)
        return replace(self, series=self.series[idx], conditions=self.conditions[idx],
                       ids=[self.ids[i] for i in idx])

    def where(self, mask):
        return self.take(np.flatnonzero(np.asarray(mask, dtype=bool)))

    def project(self, names):
        """Keep only the named condition slots (other factors become hidden)."""
        cols = [self.schema.index(n) for n in names]
        norm = self.normalization
        if norm is not None:
            norm = replace(norm, cond_min=norm.cond_min[cols], cond_max=norm.cond_max[cols])
        return replace(self, conditions=self.conditions[:, cols], schema=self.schema.subset(names),
                       normalization=norm)

    def column(self, name):
        return self.conditions[:, self.schema.index(name)]

    def fingerprint(self):
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.series).tobytes())
        h.update(np.ascontiguousarray(self.conditions).tobytes())
        h.update(self.schema.fingerprint().encode())
        return h.hexdigest()[:16]


# -- normalization ------------------------------------------------------------

def fit_normalization(dataset):
    s = dataset.series
    mins, maxs = [], []
    for j, slot in enumerate(dataset.schema.slots):
        col = dataset.conditions[:, j]
        mins.append(col.min() if slot.is_numeric else np.nan)
        maxs.append(col.max() if slot.is_numeric else np.nan)
    return Normalization(s.min(axis=(0, 1)), s.max(axis=(0, 1)), np.array(mins), np.array(maxs))


def normalize(dataset, normalization=None):
    """Min-max scale series channels and numeric slots to [0, 1].

    Constant channels and constant slots map to 0. Returns ``(dataset, meta)``.
    """
    meta = normalization or fit_normalization(dataset)
    out = replace(dataset, series=meta.apply_series(dataset.series),
                  conditions=meta.apply_conditions(dataset.conditions), normalization=meta)
    return out, meta


def denormalize(series, meta):
    return meta.invert_series(series)


# -- splits --------------------------------------------------------------------

def split(dataset, fractions=(0.7, 0.15, 0.15), seed=0):
    """Seeded shuffle into (train, validation, test)."""
    idx_parts = split_indices(len(dataset), fractions, seed)
    return tuple(dataset.take(p) for p in idx_parts)


def split_indices(n, fractions=(0.7, 0.15, 0.15), seed=0):
    fr = np.asarray(fractions, dtype=np.float64)
    if fr.ndim != 1 or len(fr) == 0 or np.any(fr < 0) or fr.sum() <= 0:
        raise ValueError("fractions must be non-negative and sum to a positive value")
    fr = fr / fr.sum()
    bounds = np.round(np.cumsum(fr) * n).astype(int)
    bounds[-1] = n
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(p) for p in np.split(perm, bounds[:-1])]


# -- CSV -----------------------------------------------------------------------

def _fmt(v):
    return "%.17g" % v


def save_csv(dataset, series_path, conditions_path, schema_path):
    n, T, d = dataset.series.shape
    with open(series_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id"] + [f"v_{i + 1}" for i in range(T * d)])
        for sid, x in zip(dataset.ids, dataset.series):
            w.writerow([sid] + [_fmt(v) for v in x.reshape(-1)])  # time-major, channel-minor
    with open(conditions_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id"] + dataset.schema.names)
        for sid, row in zip(dataset.ids, dataset.conditions):
            vals = dataset.schema.decode(row)
            w.writerow([sid] + [_fmt(vals[s.name]) if s.is_numeric else vals[s.name]
                                for s in dataset.schema.slots])
    schema = dataset.schema.to_dict()
    schema["length"] = T
    Path(schema_path).write_text(json.dumps(schema, indent=2) + "\n")


def load_csv(series_path, conditions_path, schema_path, row_filter=None):
    """Read the wide series CSV, the conditions CSV and the schema JSON.

    ``row_filter`` receives ``(id, decoded_conditions)`` and drops rows for
    which it returns False.
    """
    try:
        schema_doc = json.loads(Path(schema_path).read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{schema_path}: invalid JSON ({exc})") from None
    schema = ConditionSchema.from_dict(schema_doc)
    d_r = schema.channels

    ids, flat = [], []
    with open(series_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "id":
            raise DataFormatError(f"{series_path}: first header column must be 'id'")
        width = len(header) - 1
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) - 1 != width:
                raise DataFormatError(
                    f"{series_path}:{lineno}: ragged row ({len(row) - 1} values, expected {width})")
            vals = []
            for col, cell in enumerate(row[1:], start=2):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise DataFormatError(
                        f"{series_path}:{lineno}: column {col} is not a number: {cell!r}") from None
            ids.append(row[0])
            flat.append(vals)
    if width % d_r:
        raise DataFormatError(f"{width} values per row is not a multiple of {d_r} channels")
    T = width // d_r
    if "length" in schema_doc and int(schema_doc["length"]) != T:
        raise DataFormatError(f"schema length {schema_doc['length']} != {T} time steps in series file")

    cond_by_id = {}
    order = []
    with open(conditions_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "id":
            raise DataFormatError(f"{conditions_path}: first header column must be 'id'")
        names = header[1:]
        if sorted(names) != sorted(schema.names):
            raise DataFormatError(
                f"{conditions_path}: columns {names} do not match schema {schema.names}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataFormatError(f"{conditions_path}:{lineno}: ragged row")
            rec = dict(zip(names, row[1:]))
            try:
                cond_by_id[row[0]] = schema.encode(rec)
            except SchemaError as exc:
                raise DataFormatError(f"{conditions_path}:{lineno}: {exc}") from None
            order.append(row[0])
    if len(order) != len(ids):
        raise DataFormatError(
            f"series file has {len(ids)} rows but conditions file has {len(order)} rows")
    missing = [i for i in ids if i not in cond_by_id]
    if missing:
        raise DataFormatError(f"no conditions for series ids {missing[:5]}")

    series = np.asarray(flat, dtype=np.float64).reshape(len(ids), T, d_r)
    conds = np.array([cond_by_id[i] for i in ids]).reshape(len(ids), schema.m)
    ds = Dataset(series, conds, schema, ids=ids)
    if row_filter is not None:
        keep = [bool(row_filter(i, schema.decode(c))) for i, c in zip(ids, conds)]
        ds = ds.where(keep)
    return ds


def load_dir(path, row_filter=None):
    p = Path(path)
    return load_csv(p / "series.csv", p / "conditions.csv", p / "schema.json", row_filter)


def save_dir(dataset, path):
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    save_csv(dataset, p / "series.csv", p / "conditions.csv", p / "schema.json")


# -- synthetic lab -------------------------------------------------------------

WAVEFORMS = ("sine", "square", "sawtooth")


@dataclass(frozen=True)
class Factor:
    """A continuous range ``[low, high]`` or, if ``levels`` is set, a discrete choice."""

    low: float = 0.0
    high: float = 0.0
    levels: tuple = ()

    def __post_init__(self):
        if not self.levels and self.high < self.low:
            raise ValueError("empty factor range")

    @classmethod
    def of(cls, spec):
        if isinstance(spec, Factor):
            return spec
        if isinstance(spec, dict):
            return cls(spec.get("low", 0.0), spec.get("high", 0.0), tuple(spec.get("levels", ())))
        if isinstance(spec, (int, float)):
            return cls(float(spec), float(spec))
        spec = list(spec)
        if len(spec) == 2:
            return cls(float(spec[0]), float(spec[1]))
        raise ValueError(f"cannot interpret factor {spec!r}")

    def draw(self, rng, n):
        if self.levels:
            return rng.choice(np.asarray(self.levels, dtype=np.float64), size=n)
        return rng.uniform(self.low, self.high, size=n)


@dataclass
class SynthSpec:
    length: int = 64
    n: int = 200
    amplitude: Factor = field(default_factory=lambda: Factor(0.5, 2.0))
    frequency: Factor = field(default_factory=lambda: Factor(1.0, 3.0))  # cycles per window
    slope: Factor = field(default_factory=lambda: Factor(0.0, 0.0))
    noise: Factor = field(default_factory=lambda: Factor(0.0, 0.0))
    phase: Factor = field(default_factory=lambda: Factor(0.0, 0.0))  # radians
    waveforms: tuple = ("sine",)
    seed: int = 0

    def __post_init__(self):
        for name in ("amplitude", "frequency", "slope", "noise", "phase"):
            setattr(self, name, Factor.of(getattr(self, name)))
        f = self.frequency
        if (min(f.levels) if f.levels else f.low) < 1.0:
            raise ValueError("frequency must be at least one cycle per window")
        bad = set(self.waveforms) - set(WAVEFORMS)
        if bad or not self.waveforms:
            raise ValueError(f"waveforms must be a non-empty subset of {WAVEFORMS}")
        if self.length < 2 or self.n < 1:
            raise ValueError("need length >= 2 and n >= 1")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "waveforms" in d:
            d["waveforms"] = tuple(d["waveforms"])
        return cls(**d)


SYNTH_SCHEMA = ConditionSchema((
    Slot("amplitude"), Slot("frequency"), Slot("slope"), Slot("noise"), Slot("phase"),
    Slot("waveform", CATEGORICAL, WAVEFORMS),
))


def waveform(name, theta):
    if name == "sine":
        return np.sin(theta)
    if name == "square":
        return np.where(np.sin(theta) >= 0.0, 1.0, -1.0)
    if name == "sawtooth":
        return 2.0 * np.mod(theta / (2 * np.pi), 1.0) - 1.0
    raise ValueError(name)


def synth_generate(spec):
    """amplitude * wave(frequency, phase) + slope * t + noise * eps, t in [0, 1)."""
    rng = np.random.default_rng(spec.seed)
    n, T = spec.n, spec.length
    amp = spec.amplitude.draw(rng, n)
    freq = spec.frequency.draw(rng, n)
    slope = spec.slope.draw(rng, n)
    noise = spec.noise.draw(rng, n)
    phase = spec.phase.draw(rng, n)
    wf = rng.integers(0, len(spec.waveforms), size=n)
    eps = rng.standard_normal((n, T))
    t = np.arange(T) / T
    series = np.empty((n, T, 1))
    conds = np.empty((n, SYNTH_SCHEMA.m))
    for i in range(n):
        name = spec.waveforms[wf[i]]
        theta = 2 * np.pi * freq[i] * t + phase[i]
        series[i, :, 0] = amp[i] * waveform(name, theta) + slope[i] * t + noise[i] * eps[i]
        conds[i] = (amp[i], freq[i], slope[i], noise[i], phase[i], WAVEFORMS.index(name))
    return Dataset(series, conds, SYNTH_SCHEMA)

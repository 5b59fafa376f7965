import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ctsgen import data
from ctsgen.data import CATEGORICAL, ConditionSchema, Dataset, Slot
from ctsgen.errors import DataFormatError, SchemaError

SCHEMA = ConditionSchema((Slot("temp"), Slot("site", CATEGORICAL, ("north", "south"))))


def write_files(tmp_path, series_rows, cond_rows, schema=SCHEMA, length=None):
    s, c, j = tmp_path / "series.csv", tmp_path / "conditions.csv", tmp_path / "schema.json"
    s.write_text("\n".join(",".join(map(str, r)) for r in series_rows) + "\n")
    c.write_text("\n".join(",".join(map(str, r)) for r in cond_rows) + "\n")
    doc = schema.to_dict()
    if length is not None:
        doc["length"] = length
    j.write_text(json.dumps(doc))
    return s, c, j


def test_load_two_series(tmp_path):
    paths = write_files(tmp_path, [["id", "v_1", "v_2", "v_3"], ["a", 1, 2, 3], ["b", 4, 5, 6]],
                        [["id", "temp", "site"], ["a", 0.5, "north"], ["b", 1.5, "south"]])
    ds = data.load_csv(*paths)
    assert len(ds) == 2 and ds.shape == (3, 1)
    assert np.array_equal(ds.conditions, [[0.5, 0], [1.5, 1]])
    assert ds.ids == ["a", "b"]


def test_row_count_mismatch_names_both_counts(tmp_path):
    paths = write_files(tmp_path, [["id", "v_1"], ["a", 1], ["b", 2]], [["id", "temp", "site"], ["a", 0.5, "north"]])
    with pytest.raises(DataFormatError, match="2 rows.*1 rows"):
        data.load_csv(*paths)


def test_malformed_cells_report_location(tmp_path):
    paths = write_files(tmp_path, [["id", "v_1", "v_2"], ["a", 1, "x"]], [["id", "temp", "site"], ["a", 0.5, "north"]])
    with pytest.raises(DataFormatError, match=r"series.csv:2: column 3"):
        data.load_csv(*paths)
    paths = write_files(tmp_path, [["id", "v_1", "v_2"], ["a", 1, 2], ["b", 1]],
                        [["id", "temp", "site"], ["a", 0.5, "north"], ["b", 0.5, "north"]])
    with pytest.raises(DataFormatError, match="ragged"):
        data.load_csv(*paths)
    paths = write_files(tmp_path, [["id", "v_1"], ["a", 1]], [["id", "temp", "site"], ["a", "hot", "north"]])
    with pytest.raises(DataFormatError, match="conditions.csv:2"):
        data.load_csv(*paths)
    paths = write_files(tmp_path, [["id", "v_1"], ["a", 1]], [["id", "temp", "site"], ["a", 1.0, "east"]])
    with pytest.raises(DataFormatError, match="vocabulary"):
        data.load_csv(*paths)


def test_schema_length_mismatch(tmp_path):
    paths = write_files(tmp_path, [["id", "v_1", "v_2"], ["a", 1, 2]], [["id", "temp", "site"], ["a", 1, "north"]],
                        length=3)
    with pytest.raises(DataFormatError):
        data.load_csv(*paths)


def test_row_filter(tmp_path):
    paths = write_files(tmp_path, [["id", "v_1"], ["a", 1], ["b", 2]],
                        [["id", "temp", "site"], ["a", 0.5, "north"], ["b", 1.5, "south"]])
    ds = data.load_csv(*paths, row_filter=lambda i, c: c["site"] == "south")
    assert ds.ids == ["b"]


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), d=st.integers(1, 3))
def test_csv_round_trip_bit_exact(tmp_path_factory, seed, d):
    rng = np.random.default_rng(seed)
    n, T = 5, 4
    schema = ConditionSchema(SCHEMA.slots, channels=d)
    series = rng.standard_normal((n, T, d)) * 10.0 ** rng.integers(-300, 300, (n, T, d))
    conds = np.c_[rng.standard_normal(n) / 3, rng.integers(0, 2, n)]
    ds = Dataset(series, conds, schema)
    out = tmp_path_factory.mktemp("rt")
    data.save_dir(ds, out)
    back = data.load_dir(out)
    assert np.array_equal(back.series, ds.series)
    assert np.array_equal(back.conditions, ds.conditions)
    assert back.schema == schema and back.ids == ds.ids


def test_series_layout_is_time_major(tmp_path):
    x = np.arange(6.0).reshape(1, 3, 2)
    data.save_dir(Dataset(x, [[1.0, 0]], ConditionSchema(SCHEMA.slots, channels=2)), tmp_path)
    row = (tmp_path / "series.csv").read_text().splitlines()[1].split(",")
    assert [float(v) for v in row[1:]] == [0, 1, 2, 3, 4, 5]


def test_dataset_validation():
    with pytest.raises(DataFormatError):
        Dataset(np.zeros((2, 3)), [[1.0, 0]], SCHEMA)
    with pytest.raises(SchemaError):
        Dataset(np.zeros((1, 3)), [[1.0, 2]], SCHEMA)
    with pytest.raises(SchemaError):
        ConditionSchema((Slot("a"), Slot("a")))


def test_normalization_examples():
    x = np.array([[[1.0, 5.0], [3.0, 5.0]], [[2.0, 5.0], [0.0, 5.0]]])
    ds = Dataset(x, [[2.0, 0], [4.0, 1]], ConditionSchema(SCHEMA.slots, channels=2))
    out, meta = data.normalize(ds)
    assert out.series[..., 0].min() == 0 and out.series[..., 0].max() == 1
    assert np.all(out.series[..., 1] == 0)
    assert np.array_equal(out.conditions, [[0, 0], [1, 1]])
    assert np.array_equal(meta.invert_conditions(out.conditions), ds.conditions)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_normalize_round_trip(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((6, 5, 2)) * rng.uniform(0.1, 100) + rng.uniform(-50, 50)
    ds = Dataset(x, np.c_[rng.random(6), np.zeros(6)], SCHEMA)
    out, meta = data.normalize(ds)
    assert np.max(np.abs(data.denormalize(out.series, meta) - x)) < 1e-12 * max(1, np.abs(x).max())
    assert data.Normalization.from_dict(json.loads(json.dumps(meta.to_dict()))).to_dict() == meta.to_dict()


@settings(max_examples=50, deadline=None)
@given(n=st.integers(0, 500), seed=st.integers(0, 1000))
def test_split_properties(n, seed):
    parts = data.split_indices(n, (0.7, 0.15, 0.15), seed)
    allidx = np.concatenate(parts)
    assert sorted(allidx.tolist()) == list(range(n))
    for p, f in zip(parts, (0.7, 0.15, 0.15)):
        assert abs(len(p) - f * n) <= 1
    again = data.split_indices(n, (0.7, 0.15, 0.15), seed)
    assert all(np.array_equal(a, b) for a, b in zip(parts, again))


def test_synth_amplitude_measurement():
    spec = data.SynthSpec(length=256, n=5, amplitude=2.0, frequency=(1.0, 3.0), phase=(0, 6.28))
    ds = data.synth_generate(spec)
    ptp = np.ptp(ds.series[:, :, 0], axis=1)
    assert np.all(np.abs(ptp - 4.0) / 4.0 < 0.05)


def test_synth_conditions_equal_factors_and_determinism():
    spec = data.SynthSpec(length=50, n=20, slope=(-1, 1), noise=0.0, waveforms=data.WAVEFORMS, seed=4)
    ds = data.synth_generate(spec)
    t = np.arange(50) / 50
    for x, row in zip(ds.series[:, :, 0], ds.conditions):
        a, f, s, _, ph, w = row
        expect = a * data.waveform(data.WAVEFORMS[int(w)], 2 * np.pi * f * t + ph) + s * t
        assert np.allclose(x, expect, atol=1e-12)
    again = data.synth_generate(spec)
    assert again.fingerprint() == ds.fingerprint()
    assert data.synth_generate(data.SynthSpec(length=50, n=20, seed=5)).fingerprint() != ds.fingerprint()


def test_synth_spec_validation():
    with pytest.raises(ValueError):
        data.SynthSpec(frequency=0.5)
    with pytest.raises(ValueError):
        data.SynthSpec(amplitude=(2.0, 1.0))
    with pytest.raises(ValueError):
        data.SynthSpec(waveforms=("triangle",))


def test_project_keeps_named_slots():
    ds = data.synth_generate(data.SynthSpec(n=4, length=8))
    p = ds.project(["frequency", "amplitude"])
    assert p.schema.names == ["frequency", "amplitude"]
    assert np.array_equal(p.conditions[:, 1], ds.column("amplitude"))

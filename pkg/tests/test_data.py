import json

import numpy as np
import pytest

from socausal.data import (
    DataError,
    Dataset,
    from_columns,
    hints_from_strings,
    load_csv,
    prepare,
    read_table,
    save_csv,
)


def _write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_binary_and_real(tmp_path):
    rng = np.random.default_rng(0)
    rows = "\n".join(f"{int(b)},{float(v)!r}" for b, v in zip(rng.random(30) < 0.5, rng.normal(size=30)))
    ds = load_csv(_write(tmp_path, rows), header=False)
    assert [d.kind for d in ds.domains] == ["binary", "full-real"]
    assert ds.column_names == ("x0", "x1")
    assert ds.row_count == 30


def test_angle_hint(tmp_path):
    text = "day,temp\n" + "\n".join(f"{d},{10 * np.sin(d / 58):.3f}" for d in range(1, 366, 7))
    ds = load_csv(_write(tmp_path, text), hints={"day": "angle:365"})
    assert ds.domains[0].kind == "circle" and ds.domains[1].kind == "full-real"
    np.testing.assert_allclose(np.linalg.norm(ds.columns[0], axis=1), 1.0, atol=1e-12)
    assert ds.columns[0].shape == (len(range(1, 366, 7)), 2)


def test_coordinate_pair_hint(tmp_path):
    ang = np.linspace(0, 6, 20)
    text = "c,s,v\n" + "\n".join(f"{float(np.cos(a))!r},{float(np.sin(a))!r},{a}" for a in ang)
    ds = load_csv(_write(tmp_path, text), hints={"c": "circle:s"})
    assert ds.column_names == ("c", "v")
    assert ds.domains[0].kind == "circle"


def test_non_numeric_cell_names_row(tmp_path):
    lines = ["a,b"] + [f"{i},{i * 0.5}" for i in range(5)] + ["abc,1.0"]
    with pytest.raises(DataError, match="row 7"):
        load_csv(_write(tmp_path, "\n".join(lines)))


def test_ragged_and_empty(tmp_path):
    with pytest.raises(DataError, match="row 3"):
        load_csv(_write(tmp_path, "a,b\n1,2\n3\n"))
    with pytest.raises(DataError, match="empty"):
        load_csv(_write(tmp_path, ""))
    with pytest.raises(DataError, match="non-finite"):
        load_csv(_write(tmp_path, "a,b\n1,2\nnan,3\n"))
    with pytest.raises(DataError, match="unknown"):
        load_csv(_write(tmp_path, "a,b\n1,2\n2,3\n"), hints={"zz": "binary"})


def test_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(1)
    vals = rng.normal(size=(50, 2)) * 1e3
    text = "u,v\n" + "\n".join(f"{float(a)!r},{float(b)!r}" for a, b in vals)
    ds = load_csv(_write(tmp_path, text))
    save_csv(ds, tmp_path / "out.csv")
    ds2 = load_csv(tmp_path / "out.csv")
    for a, b in zip(ds.columns, ds2.columns):
        assert np.array_equal(a, b)
    assert ds.domains == ds2.domains


def test_prepare_binning_and_idempotence():
    rng = np.random.default_rng(2)
    ds = from_columns({"x": (rng.random(500) < 0.5).astype(float), "y": rng.normal(size=500)})
    p = prepare(ds, bins=100)
    assert p.domains[0] == ds.domains[0]
    np.testing.assert_array_equal(p.columns[0], ds.columns[0])
    assert p.domains[1].kind == "finite-set" and len(p.domains[1].points) == 100
    assert p.metadata["binned"] == {"y": 100}
    pp = prepare(p, bins=100)
    assert pp.domains == p.domains
    for a, b in zip(pp.columns, p.columns):
        assert np.array_equal(a, b)
    assert prepare(ds) is ds


def test_summary_json():
    ds = from_columns({"x": [0, 1, 1, 0], "y": [0.5, 2.0, 3.5, 1.0]})
    doc = json.loads(ds.summary_json())
    assert doc["rows"] == 4
    assert doc["columns"][0]["domain"]["kind"] == "binary"
    assert doc["columns"][1]["distinct"] == 4


def test_dataset_invariants():
    with pytest.raises(DataError):
        Dataset(("a", "b"), (np.zeros(3), np.zeros(4)), (None, None))
    ds = from_columns({"x": [0, 1, 1], "y": [1.0, 2.0, 4.0]})
    assert ds.select(["y"]).column_names == ("y",)
    with pytest.raises(DataError):
        ds.select(["z"])
    with pytest.raises(ValueError):
        ds.columns[0][0] = 5


def test_header_detection_and_hints(tmp_path):
    names, body = read_table(_write(tmp_path, "1,2\n3,4\n"))
    assert names == ["x0", "x1"] and body.shape == (2, 2)
    assert hints_from_strings(["a=binary", "day=angle:365"]) == {"a": "binary", "day": "angle:365"}
    with pytest.raises(DataError):
        hints_from_strings(["nohint"])
    with pytest.raises(DataError):
        hints_from_strings(["a=weird"])


def test_shuffled_rows_same_domains(tmp_path):
    rng = np.random.default_rng(3)
    vals = np.column_stack([rng.integers(1, 16, 80), rng.exponential(size=80)])
    t1 = "a,b\n" + "\n".join(f"{int(a)},{float(b)!r}" for a, b in vals)
    t2 = "a,b\n" + "\n".join(f"{int(a)},{float(b)!r}" for a, b in vals[rng.permutation(80)])
    assert load_csv(_write(tmp_path, t1, "1.csv")).domains == load_csv(_write(tmp_path, t2, "2.csv")).domains

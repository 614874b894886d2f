import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from cphealth import io
from cphealth.core import HealthCube, ObservationMask, Region, RegionCatalog
from cphealth.errors import IngestError
from cphealth.harness import ExperimentSpec, run_experiment
from cphealth.synthetic import SyntheticSpec, generate_synthetic


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_single_entry(tmp_path):
    r = write(tmp_path / "r.csv", "region_id,name,lat,lon\nW1,Ward 1,51.5,-0.1\n")
    m = write(tmp_path / "m.csv", "region_id,disease,year,rate\nW1,CHD,2015,0.031\n")
    cube, mask, cat = io.ingest(r, m)
    assert cube.shape == (1, 1, 1) and cube.values[0, 0, 0] == 0.031
    assert mask.mask.all() and cat.ids == ["W1"]


def test_unknown_region_names_id_and_line(tmp_path):
    r = write(tmp_path / "r.csv", "region_id,name,lat,lon\nW1,a,51.5,-0.1\n")
    m = write(tmp_path / "m.csv", "region_id,disease,year,rate\nW1,CHD,2015,0.03\nW9,CHD,2015,0.02\n")
    with pytest.raises(IngestError) as e:
        io.ingest(r, m)
    assert "W9" in str(e.value) and e.value.line == 3


@pytest.mark.parametrize("row, needle", [
    ("W1,CHD,2015,1.2", "out of range"),
    ("W1,CHD,15,0.1", "4-digit"),
    ("W1,CHD,2015,abc", "not a number"),
    ("W1,,2015,0.1", "empty disease"),
])
def test_bad_rows(tmp_path, row, needle):
    r = write(tmp_path / "r.csv", "region_id,name,lat,lon\nW1,a,51.5,-0.1\n")
    m = write(tmp_path / "m.csv", f"region_id,disease,year,rate\n{row}\n")
    with pytest.raises(IngestError, match=needle) as e:
        io.ingest(r, m)
    assert e.value.line == 2


def test_duplicate_row_names_first(tmp_path):
    r = write(tmp_path / "r.csv", "region_id,name,lat,lon\nW1,a,51.5,-0.1\n")
    m = write(tmp_path / "m.csv", "region_id,disease,year,rate\nW1,CHD,2015,0.1\nW1,CHD,2015,0.2\n")
    with pytest.raises(IngestError, match="first on line 2"):
        io.ingest(r, m)


def test_missing_header_and_file(tmp_path):
    r = write(tmp_path / "r.csv", "id,name,lat,lon\nW1,a,51.5,-0.1\n")
    with pytest.raises(IngestError, match="header"):
        io.read_regions(r)
    with pytest.raises(IngestError):
        io.read_regions(tmp_path / "nope.csv")


def test_absent_rows_are_native_missing(tmp_path):
    r = write(tmp_path / "r.csv", "region_id,name,lat,lon\nA,a,51.5,-0.1\nB,b,51.6,-0.1\n")
    m = write(tmp_path / "m.csv", "region_id,disease,year,rate\nA,X,2011,0.1\nB,X,2010,0.2\nA,Y,2010,0.3\n")
    cube, mask, _ = io.ingest(r, m)
    assert cube.diseases == ("X", "Y") and cube.years == (2010, 2011)
    assert mask.mask.sum() == 3 and not mask.mask[1, 1, 0]


def _catalog(n):
    return RegionCatalog([Region(f"R{i}", f"name {i}", 51.0 + i * 1e-3, -0.1 - i * 1e-3) for i in range(n)])


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 3), st.integers(1, 3)),
              elements=st.floats(0, 1)), st.data())
def test_export_ingest_round_trip(values, data):
    import tempfile
    from pathlib import Path

    mask = data.draw(arrays(bool, values.shape))
    mask[0, 0, 0] = True
    values = np.where(mask, values, np.nan)
    n, d, t = values.shape
    # ingest only knows diseases/years that appear, so make each one appear
    for k in range(d):
        mask[0, k, 0] = True
    for y in range(t):
        mask[0, 0, y] = True
    values = np.where(mask, np.nan_to_num(values, nan=0.5), np.nan)
    cube = HealthCube(values, [f"D{k}" for k in range(d)], range(2000, 2000 + t))
    with tempfile.TemporaryDirectory() as tmp:
        io.export_dir(cube, ObservationMask(mask), _catalog(n), tmp)
        back, bmask, bcat = io.ingest_dir(Path(tmp))
    assert np.array_equal(bmask.mask, mask)
    assert np.array_equal(back.values[mask], cube.values[mask])
    assert back.diseases == cube.diseases and back.years == cube.years and bcat == _catalog(n)


def test_targets_round_trip(tmp_path):
    cube, mask, cat = generate_synthetic(SyntheticSpec(n_regions=6, n_diseases=2, n_years=3))
    t = np.random.default_rng(0).random(cube.shape) < 0.3
    io.write_targets(tmp_path / "t.csv", t, cube, cat)
    assert np.array_equal(io.read_targets(tmp_path / "t.csv", cube, cat), t)


def test_report_serialization(tmp_path):
    cube, mask, cat = generate_synthetic(SyntheticSpec(n_regions=15, n_diseases=2, n_years=4))
    rep = run_experiment(cube, mask, cat, ExperimentSpec(cube.years[-1], proportions=(0.4, 1.0), completers=("ucf",)))
    io.write_report_csv(tmp_path / "r.csv", rep)
    io.write_report_json(tmp_path / "r.json", rep)
    rows = io.read_report_csv(tmp_path / "r.csv")
    assert len(rows) == len(rep.records)
    assert rows[-1]["rmse"] == "" and rows[0]["mae"] == io.fmt(rep.records[0]["mae"])
    doc = json.loads((tmp_path / "r.json").read_text())
    assert doc["provenance"]["experiment"]["proportions"] == [0.4, 1.0]
    assert doc["records"][-1]["mae"] is None


def test_fmt():
    assert io.fmt(0.1 + 0.2) == "0.3"
    assert io.fmt(float("nan")) == "" and io.fmt(None) == ""
    assert io.fmt(3) == "3" and io.fmt(True) == "true"


def test_flat_config(tmp_path):
    p = write(tmp_path / "c.json", json.dumps({"seeds": [1], "proportions": [0.5]}))
    assert io.load_config(p)["seeds"] == [1]
    bad = write(tmp_path / "b.json", json.dumps({"nested": {"a": 1}}))
    with pytest.raises(IngestError):
        io.load_config(bad)

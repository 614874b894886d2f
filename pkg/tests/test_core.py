import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from cphealth.core import (
    DiseaseMatrix, HealthCube, ObservationMask, Region, RegionCatalog, assemble_cube, slice_disease, validate_cube,
)
from cphealth.errors import ShapeMismatch, UnknownDisease


def catalog(n):
    return RegionCatalog([Region(f"R{i}", f"r{i}", 51.0 + 0.01 * i, 0.0) for i in range(n)])


def test_single_entry_slice():
    cube = HealthCube([[[0.031]]], ["CHD"], [2015])
    m = slice_disease(cube, ObservationMask.full(cube), "CHD")
    assert m.values.tolist() == [[0.031]]
    assert m.mask.tolist() == [[True]]


def test_slice_matches_manual_plane():
    values = np.arange(12, dtype=float).reshape(3, 2, 2) / 100
    cube = HealthCube(values, ["a", "b"], [2000, 2001])
    m = slice_disease(cube, ObservationMask.full(cube), "b")
    expected = [[values[i, 1, y] for y in range(2)] for i in range(3)]
    assert m.values.tolist() == expected


def test_unknown_disease():
    cube = HealthCube(np.zeros((1, 1, 1)), ["a"], [2000])
    with pytest.raises(UnknownDisease):
        slice_disease(cube, ObservationMask.full(cube), "zzz")


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 4), st.integers(1, 4)),
              elements=st.floats(0, 1)),
       st.data())
def test_slice_reassemble_round_trip(values, data):
    n, d, t = values.shape
    mask = data.draw(arrays(bool, values.shape))
    cube = HealthCube(values, [f"D{k}" for k in range(d)], range(2000, 2000 + t))
    om = ObservationMask(mask)
    back, back_mask = assemble_cube([slice_disease(cube, om, c) for c in cube.diseases])
    assert back.values.tobytes() == cube.values.tobytes()
    assert back.diseases == cube.diseases and back.years == cube.years
    assert np.array_equal(back_mask.mask, mask)


def test_shape_checks():
    with pytest.raises(ShapeMismatch):
        HealthCube(np.zeros((2, 2, 3)), ["a", "b"], [2000, 2001])
    with pytest.raises(ShapeMismatch):
        DiseaseMatrix(np.zeros((2, 2)), np.ones((2, 3), bool))
    cube = HealthCube(np.zeros((2, 1, 1)), ["a"], [2000])
    with pytest.raises(ShapeMismatch):
        ObservationMask.for_cube(cube, np.ones((1, 1, 1), bool))


def test_arrays_are_read_only():
    cube = HealthCube(np.zeros((1, 1, 1)), ["a"], [2000])
    with pytest.raises(ValueError):
        cube.values[0, 0, 0] = 1.0


def test_validate_clean():
    cube = HealthCube(np.full((2, 1, 2), 0.1), ["a"], [2000, 2001])
    assert validate_cube(cube, catalog(2)) == []


def test_validate_rate_out_of_range():
    v = np.full((2, 1, 2), 0.1)
    v[1, 0, 1] = 1.5
    report = validate_cube(HealthCube(v, ["a"], [2000, 2001]), catalog(2))
    assert len(report) == 1
    assert "rate out of range" in report[0] and "(R1, a, 2001)" in report[0]


def test_validate_years_not_increasing():
    cube = HealthCube(np.full((1, 1, 2), 0.1), ["a"], [2009, 2009])
    report = validate_cube(cube, catalog(1))
    assert any("years not strictly increasing" in r for r in report)


def test_validate_ignores_unobserved():
    v = np.full((1, 1, 2), 0.1)
    v[0, 0, 0] = 7.0
    cube = HealthCube(v, ["a"], [2000, 2001])
    assert validate_cube(cube, catalog(1), ObservationMask([[[False, True]]])) == []


def test_mask_counts():
    m = ObservationMask(np.array([[[True, False]], [[True, True]]]))
    assert m.observed_count(0, 0) == 2 and m.observed_count(0, 1) == 1

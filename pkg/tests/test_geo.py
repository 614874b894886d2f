import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cphealth.core import Region, RegionCatalog
from cphealth.errors import InvalidCoordinate
from cphealth.geo import (
    build_pair_groups, check_distance_matrix, distance_matrix, great_circle_km, nearest_neighbors,
)

from conftest import line_catalog, random_catalog


def reference_haversine(lat1, lon1, lat2, lon2, r=6371.0):
    # written independently: scalar math with atan2 form
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp, dl = p2 - p1, math.radians(lon2 - lon1)
    h = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * r * math.atan2(math.sqrt(h), math.sqrt(1 - h))


def test_identical_points():
    assert great_circle_km((51.5, -0.1), (51.5, -0.1)) == 0.0


def test_london_pair_against_reference():
    got = great_circle_km((51.5074, -0.1278), (51.5155, -0.0922))
    assert abs(got - reference_haversine(51.5074, -0.1278, 51.5155, -0.0922)) <= 1e-6


def test_symmetry_random_pairs():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        a = (rng.uniform(-90, 90), rng.uniform(-180, 180))
        b = (rng.uniform(-90, 90), rng.uniform(-180, 180))
        assert great_circle_km(a, b) == great_circle_km(b, a)


@settings(max_examples=200, deadline=None)
@given(st.floats(-90, 90), st.floats(-180, 180), st.floats(-90, 90), st.floats(-180, 180))
def test_matches_reference(a, b, c, d):
    assert great_circle_km((a, b), (c, d)) == pytest.approx(reference_haversine(a, b, c, d), abs=1e-6)


def test_invalid_coordinate():
    with pytest.raises(InvalidCoordinate):
        great_circle_km((91.0, 0.0), (0.0, 0.0))


def test_two_regions_first_group():
    g = build_pair_groups(line_catalog([0.0, 0.4]), bin_width=1.0)
    assert g.groups[0].tolist() == [[1, 0]]
    assert all(len(x) == 0 for x in g.groups[1:])


def test_collinear_binning():
    g = build_pair_groups(line_catalog([0.0, 1.5, 3.0]), bin_width=1.0)
    assert sorted(map(tuple, g.groups[1].tolist())) == [(1, 0), (2, 1)]
    assert g.groups[2].tolist() == [[2, 0]]
    # direct oracle: bin index = floor(d / bw)
    dist = distance_matrix(line_catalog([0.0, 1.5, 3.0]))
    for k, pairs in enumerate(g.groups):
        for i, j in pairs:
            assert math.floor(dist[i, j]) == k


def test_pair_count_identity():
    rng = np.random.default_rng(1)
    cat = random_catalog(40, rng, spread=0.5)
    g = build_pair_groups(cat, bin_width=1.0, M=20)
    assert sum(g.counts) + g.dropped == 40 * 39 // 2


def test_permutation_invariance_of_groups():
    rng = np.random.default_rng(2)
    cat = random_catalog(25, rng)
    perm = rng.permutation(25)
    g1 = build_pair_groups(cat)
    g2 = build_pair_groups(cat.subset(perm))
    d1, d2 = distance_matrix(cat), distance_matrix(cat.subset(perm))
    for a, b in zip(g1.groups, g2.groups):
        x = np.sort([d1[i, j] for i, j in a])
        y = np.sort([d2[i, j] for i, j in b])
        assert np.allclose(x, y, rtol=0, atol=1e-9)


def test_neighbors_simple_and_tie():
    dist = np.array([[0, 1, 2], [1, 0, 1.5], [2, 1.5, 0]], float)
    assert nearest_neighbors(dist)[0].tolist() == [1, 2]
    tie = np.array([[0, 1, 1], [1, 0, 1], [1, 1, 0]], float)
    assert nearest_neighbors(tie)[0].tolist() == [1, 2]


def test_neighbors_against_sort_oracle():
    rng = np.random.default_rng(5)
    dist = distance_matrix(random_catalog(20, rng))
    nb = nearest_neighbors(dist)
    for i in range(20):
        others = sorted((dist[i, j], j) for j in range(20) if j != i)
        assert nb[i].tolist() == [j for _, j in others]
    assert np.array_equal(nb, nearest_neighbors(dist))


def test_distance_matrix_checks():
    rng = np.random.default_rng(6)
    assert check_distance_matrix(distance_matrix(random_catalog(10, rng))) == []
    bad = np.array([[0.0, 1.0], [2.0, 0.0]])
    assert check_distance_matrix(bad)

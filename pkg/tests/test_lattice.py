import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from percoface.errors import ConfigurationError
from percoface.lattice import alpha, build_box, edge_count


@pytest.mark.parametrize("d,L", [(2, 1), (2, 2), (2, 5), (3, 2), (3, 4), (4, 2)])
def test_edge_count_formula_matches_enumeration(d, L):
    lat = build_box(d, L)
    assert lat.n_edges == edge_count(d, L)
    assert lat.n_vertices == (L + 1) ** d


def test_smallest_box():
    lat = build_box(2, 1)
    assert lat.n_vertices == 4
    assert lat.n_edges == 4  # 2 * 1 * 2
    # bottom, left, top, right in the deterministic ordering
    assert lat.edge_id((0, 0), (1, 0)) == 0
    assert lat.edge_id((0, 0), (0, 1)) == 1
    assert lat.edge_id((0, 1), (1, 1)) == 2
    assert lat.edge_id((1, 0), (1, 1)) == 3


def test_l2_counts():
    lat = build_box(2, 2)
    assert lat.n_edges == 12
    assert lat.n_vertices == 9


def test_3d_l4_edge_count():
    # formula: 3 * 4 * 25 = 300, checked against exhaustive enumeration
    lat = build_box(3, 4)
    assert lat.n_edges == 300
    seen = set()
    for x in itertools.product(range(5), repeat=3):
        for a in range(3):
            y = list(x)
            y[a] += 1
            if y[a] <= 4:
                seen.add((x, tuple(y)))
    assert len(seen) == 300


def test_faces():
    lat = build_box(3, 2)
    assert len(lat.top) == len(lat.bottom) == 9
    assert not set(lat.top.tolist()) & set(lat.bottom.tolist())
    assert all(lat.vertices[v][-1] == 2 for v in lat.top)
    assert all(lat.vertices[v][-1] == 0 for v in lat.bottom)


def _star_neighbors_bruteforce(lat, e):
    m = lat.midpoints
    diff = np.abs(m - m[e]).max(axis=1)
    out = np.nonzero(diff <= 1.0)[0]
    return sorted(int(f) for f in out if f != e)


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_alpha_interior_edge(d):
    # The closed-form count 3^d + 4(d-1)3^(d-2) - 1: 12, 50, 188, 674.
    lat = build_box(d, 4)
    central = int(np.argmin(np.abs(lat.midpoints - 2.0).max(axis=1)))
    neigh = lat.star_neighbors(central)
    assert len(neigh) == alpha(d)
    assert list(neigh) == _star_neighbors_bruteforce(lat, central)


def test_alpha_values():
    assert [alpha(d) for d in (2, 3, 4, 5)] == [12, 50, 188, 674]


def test_star_neighbors_match_bruteforce_everywhere():
    for lat in (build_box(2, 3), build_box(3, 2)):
        for e in range(lat.n_edges):
            assert list(lat.star_neighbors(e)) == _star_neighbors_bruteforce(lat, e)


def test_corner_edge_of_smallest_box_has_three_neighbors():
    lat = build_box(2, 1)
    for e in range(4):
        assert len(lat.star_neighbors(e)) == 3


def test_edge_distance_examples():
    lat = build_box(2, 3)
    e = lat.edge_id((0, 0), (0, 1))
    assert lat.edge_distance(e, e) == 0.0
    f = lat.edge_id((1, 0), (1, 1))  # parallel, offset by one step
    assert lat.edge_distance(e, f) == pytest.approx(1.0)
    g = lat.edge_id((0, 0), (1, 0))  # perpendicular, shared vertex at origin
    assert lat.edge_distance(e, g) == pytest.approx(math.sqrt(0.5))


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_edge_distance_is_a_metric(data):
    lat = build_box(2, 4)
    idx = st.integers(min_value=0, max_value=lat.n_edges - 1)
    e, f, g = (data.draw(idx) for _ in range(3))
    assert lat.edge_distance(e, f) == pytest.approx(lat.edge_distance(f, e))
    assert (lat.edge_distance(e, f) == 0) == (e == f)
    assert lat.edge_distance(e, g) <= lat.edge_distance(e, f) + lat.edge_distance(f, g) + 1e-12


def test_distance_to_boundary_examples():
    lat1 = build_box(2, 1)
    assert lat1.distance_to_boundary(lat1.edge_id((0, 0), (0, 1))) == 0.0
    # every edge of the unit box lies in a face
    assert {lat1.distance_to_boundary(e) for e in range(4)} == {0.0}

    lat4 = build_box(2, 4)
    e = lat4.edge_id((2, 2), (2, 3))  # midpoint (2, 2.5)
    assert lat4.distance_to_boundary(e) == pytest.approx(1.5)


def test_set_distance():
    lat = build_box(2, 4)
    e = lat.edge_id((2, 2), (2, 3))
    assert lat.set_distance(e, [e]) == 0.0
    assert lat.set_distance(e, []) == math.inf
    assert lat.set_distance(e, [], include_boundary=True) == pytest.approx(1.5)
    f = lat.edge_id((0, 0), (1, 0))
    assert lat.set_distance(e, [e, f]) == 0.0


def test_deterministic_ordering():
    a = build_box(3, 3)
    b = build_box(3, 3)
    assert np.array_equal(a.edges, b.edges)
    assert np.array_equal(a.edge_axis, b.edge_axis)


def test_construction_errors():
    with pytest.raises(ConfigurationError):
        build_box(1, 4)
    with pytest.raises(ConfigurationError):
        build_box(2, 0)
    with pytest.raises(ConfigurationError):
        build_box(4, 100, max_vertices=10_000)

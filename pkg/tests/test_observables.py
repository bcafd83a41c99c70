import math

import numpy as np
import pytest

from percoface.connectivity import Config, minimal_cut_from, separates
from percoface.dynamics import RngStream, init_state, step
from percoface.errors import ContractViolation
from percoface.lattice import build_box
from percoface.observables import (
    hausdorff_semi,
    hausdorff_union_boundary,
    interface,
    isolation_radius,
    pivotal,
    pivotal_via_sets,
    s_minus,
    s_plus,
)
from percoface.oracle import pivotal_bruteforce, sample_disconnected

from conftest import ScriptedRng, make_config

B, L, T, R = 0, 1, 2, 3


def test_interface_empty_when_equal(box21):
    rng = RngStream(1)
    st = init_state(box21, 0.9, rng)
    st.Y[:] = st.X
    assert interface(st).size == 0


def test_interface_after_veto(box21):
    st = init_state(box21, 0.9, RngStream(0))
    st.X[:] = False
    step(st, ScriptedRng([(L, True)]))
    assert interface(st).tolist() == [L]


def test_interface_matches_bruteforce(box23):
    gen = np.random.Generator(np.random.PCG64(2))
    for _ in range(30):
        x = gen.random(box23.n_edges) < 0.7
        y = x & (gen.random(box23.n_edges) < 0.8)  # dominated pair
        st_like = type("S", (), {"X": x, "Y": y})
        got = set(interface(st_like).tolist())
        want = {e for e in range(box23.n_edges) if x[e] and not y[e]}
        assert got == want


def test_pivotal_smallest_box(box21):
    assert pivotal(make_config(box21, [])).tolist() == [L, R]
    assert pivotal(make_config(box21, [B, T])).tolist() == [L, R]


def test_pivotal_requires_disconnection(box21):
    with pytest.raises(ContractViolation):
        pivotal(make_config(box21, range(4)))


def test_pivotal_of_minimal_cut_complement():
    # everything open except one minimal cut: exactly the cut edges are pivotal
    lat = build_box(2, 3)
    cut = [k for k in range(lat.n_edges)
           if lat.edge_axis[k] == 1 and lat.vertices[lat.edges[k][0]][1] == 1]
    cfg = make_config(lat, set(range(lat.n_edges)) - set(cut))
    assert sorted(pivotal(cfg).tolist()) == sorted(cut)


def test_pivotal_matches_trial_opening(box23):
    samples = sample_disconnected(box23, 0.6, 50, seed=11)
    for row in samples:
        cfg = Config(box23, row)
        assert pivotal(cfg).tolist() == pivotal_bruteforce(cfg).tolist()


def test_boundary_sets_smallest_box(box21):
    cfg = make_config(box21, [])
    assert s_plus(cfg).tolist() == [L, R]
    assert s_minus(cfg).tolist() == [L, R]


def test_boundary_set_all_closed_any_l():
    # all edges closed: S+ is exactly the set of vertical edges below the top face
    for d, Lside in [(2, 3), (3, 2)]:
        lat = build_box(d, Lside)
        cfg = make_config(lat, [])
        want = [k for k in range(lat.n_edges)
                if lat.edge_axis[k] == d - 1
                and lat.vertices[lat.edges[k][1]][d - 1] == Lside]
        assert sorted(s_plus(cfg).tolist()) == sorted(want)


def test_boundary_sets_separate_and_prune(box23):
    for row in sample_disconnected(box23, 0.55, 25, seed=3):
        cfg = Config(box23, row)
        sp = s_plus(cfg)
        sm = s_minus(cfg)
        assert separates(box23, sp)
        assert separates(box23, sm)
        cut = minimal_cut_from(box23, sp)
        assert separates(box23, cut)


def test_pivotal_via_sets_equals_pivotal(box23):
    for row in sample_disconnected(box23, 0.6, 40, seed=7):
        cfg = Config(box23, row)
        assert np.array_equal(pivotal_via_sets(cfg), pivotal(cfg))


def test_empty_pivotal_set_from_thick_slab(box24):
    # open everything in the two rows hugging T and B, close the middle slab:
    # S+ and S- are disjoint, so no edge is pivotal.
    lat = box24
    keep = []
    for k in range(lat.n_edges):
        y_lo = min(lat.vertices[lat.edges[k][0]][1], lat.vertices[lat.edges[k][1]][1])
        y_hi = max(lat.vertices[lat.edges[k][0]][1], lat.vertices[lat.edges[k][1]][1])
        if y_lo >= 3 or y_hi <= 1:
            keep.append(k)
    cfg = make_config(lat, keep)
    assert pivotal(cfg).size == 0
    assert pivotal_bruteforce(cfg).size == 0
    assert np.intersect1d(s_plus(cfg), s_minus(cfg)).size == 0


def test_isolation_radius(box21, box24):
    cfg = make_config(box21, [])
    assert isolation_radius(cfg, L) == 0.0  # l sits on the face

    # single pivotal edge deep inside: the radius is its boundary distance
    lat = box24
    cfg4 = make_config(lat, [])
    piv = np.array([lat.edge_id((2, 2), (2, 3))])
    assert isolation_radius(cfg4, int(piv[0]), piv=piv) == pytest.approx(1.5)


def test_isolation_radius_matches_bruteforce(box23):
    for row in sample_disconnected(box23, 0.6, 20, seed=5):
        cfg = Config(box23, row)
        piv = pivotal(cfg)
        for e in piv:
            want = cfg.lattice.distance_to_boundary(int(e))
            for f in piv:
                if f != e:
                    want = min(want, cfg.lattice.edge_distance(int(e), int(f)))
            assert isolation_radius(cfg, int(e), piv=piv) == pytest.approx(want)


# ---------------------------------------------------------------------------
# Hausdorff machinery
# ---------------------------------------------------------------------------

def test_hausdorff_semi_identity_and_symmetry(box24):
    gen = np.random.Generator(np.random.PCG64(21))
    for _ in range(30):
        A = np.nonzero(gen.random(box24.n_edges) < 0.2)[0]
        B_ = np.nonzero(gen.random(box24.n_edges) < 0.2)[0]
        ell = float(gen.random() * 2)
        assert hausdorff_semi(box24, A, A, ell) == 0.0
        assert hausdorff_semi(box24, A, B_, ell) == hausdorff_semi(box24, B_, A, ell)


def test_hausdorff_semi_singletons(box24):
    e = box24.edge_id((2, 2), (2, 3))
    f = box24.edge_id((1, 2), (2, 2))
    d = box24.edge_distance(e, f)
    assert hausdorff_semi(box24, [e], [f], 0.0) == pytest.approx(d)


def test_hausdorff_semi_trimming_and_sentinel(box24):
    deep = box24.edge_id((2, 2), (2, 3))   # boundary distance 1.5
    shallow = box24.edge_id((0, 0), (1, 0))  # on the face
    # both sets inside the trimmed collar: constraints vacuous
    assert hausdorff_semi(box24, [shallow], [shallow], 5.0) == 0.0
    # one trimmed set nonempty against an empty set: no radius works
    assert hausdorff_semi(box24, [deep], [], 1.0) == math.inf
    assert hausdorff_semi(box24, [], [deep], 1.0) == math.inf
    # trimmed-away source against empty target is vacuous again
    assert hausdorff_semi(box24, [shallow], [], 1.0) == 0.0


def test_hausdorff_union_boundary(box24):
    assert hausdorff_union_boundary(box24, [], []) == 0.0
    e = box24.edge_id((2, 2), (2, 3))
    assert hausdorff_union_boundary(box24, [e], [e]) == 0.0
    # singleton against nothing: distance saturates at the boundary distance
    assert hausdorff_union_boundary(box24, [e], []) == pytest.approx(1.5)


def _semi_distance_constraints_hold(lat, A, B_, ell, r):
    """Literal inf-definition check: both trimmed inclusions at radius r."""
    bd = lat.boundary_distances()
    for src, dst in ((A, B_), (B_, A)):
        for a in src:
            if bd[a] < ell:
                continue  # trimmed away
            if dst.size == 0:
                return False
            d = np.linalg.norm(lat.midpoints[dst] - lat.midpoints[a], axis=1).min()
            if not d < r:  # neighbourhoods are open balls
                return False
    return True


def test_hausdorff_semi_matches_inf_definition(box24):
    # the returned value is exactly the infimum: constraints hold just above
    # it and fail just below it
    gen = np.random.Generator(np.random.PCG64(77))
    checked_above = checked_below = 0
    for _ in range(120):
        A = np.nonzero(gen.random(box24.n_edges) < 0.15)[0]
        B_ = np.nonzero(gen.random(box24.n_edges) < 0.15)[0]
        ell = float(gen.random() * 3)
        val = hausdorff_semi(box24, A, B_, ell)
        if math.isinf(val):
            assert not _semi_distance_constraints_hold(box24, A, B_, ell, 1e9)
            continue
        assert _semi_distance_constraints_hold(box24, A, B_, ell, val + 1e-9)
        checked_above += 1
        if val > 0:
            assert not _semi_distance_constraints_hold(box24, A, B_, ell, val - 1e-9)
            checked_below += 1
    assert checked_above > 50 and checked_below > 20


def test_comparison_inequality_random(box24):
    # d_H^ell(A, B) max ell >= d_H(A u complement, B u complement)
    gen = np.random.Generator(np.random.PCG64(31))
    for _ in range(200):
        A = np.nonzero(gen.random(box24.n_edges) < 0.15)[0]
        B_ = np.nonzero(gen.random(box24.n_edges) < 0.15)[0]
        ell = float(gen.random() * 3)
        lhs = max(hausdorff_semi(box24, A, B_, ell), ell)
        rhs = hausdorff_union_boundary(box24, A, B_)
        assert lhs >= rhs - 1e-12

"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s``.  The statistical criteria
write their golden curves (with confidence intervals) under tests/goldens/.
All tolerances are pinned here; nothing is deferred to later calibration.
"""

import json
import os
import time
from collections import deque

import numpy as np
import pytest

from percoface.connectivity import Config
from percoface.dynamics import RngStream, init_state, step
from percoface.experiments import (
    ExperimentConfig,
    envelope_fit,
    run_experiment,
    run_from_manifest,
    sample_conditioned,
    wilson_interval,
)
from percoface.lattice import alpha, build_box
from percoface.observables import (
    hausdorff_semi,
    hausdorff_union_boundary,
    pivotal,
    pivotal_via_sets,
    s_plus,
)
from percoface.oracle import (
    exact_stationary,
    pivotal_bruteforce_batch,
    sample_disconnected,
    stationary_chain_check,
)

GOLDEN_DIR = os.path.join(os.path.dirname(__file__), "goldens")


def _report(name: str, ok: bool, detail: str = ""):
    print(f"[ACCEPTANCE] {name}: {'PASS' if ok else 'FAIL'} {detail}".rstrip())
    assert ok, f"{name}: {detail}"


def _write_golden(name: str, payload: dict):
    os.makedirs(GOLDEN_DIR, exist_ok=True)
    with open(os.path.join(GOLDEN_DIR, name), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# 1. alpha(d) exactness
# ---------------------------------------------------------------------------

def test_alpha_exactness():
    t0 = time.time()
    # formula 3^d + 4(d-1)3^(d-2) - 1 gives 12, 50, 188, 674 for d = 2..5
    expected = {2: 12, 3: 50, 4: 188, 5: 674}
    ok = True
    for d in (2, 3, 4, 5):
        lat = build_box(d, 4)
        central = int(np.argmin(np.abs(lat.midpoints - 2.0).max(axis=1)))
        count = len(lat.star_neighbors(central))
        ok &= count == alpha(d) == expected[d]
    _report("alpha(d) exactness (d=2..5)", ok, f"{time.time()-t0:.1f}s")


# ---------------------------------------------------------------------------
# 2. Coupling invariants over a 1e6-step run
# ---------------------------------------------------------------------------

def test_coupling_invariants_million_steps():
    t0 = time.time()
    lat = build_box(2, 8)
    rng = RngStream(2024)
    state = init_state(lat, 0.95, rng)
    violations = 0
    for _ in range(1_000_000):
        ev = step(state, rng)
        # domination can only break at the touched edge; full sweeps below
        if state.Y[ev.edge] and not state.X[ev.edge]:
            violations += 1
        if not state.clusters.disconnected():
            violations += 1
        if state.t % 10_000 == 0:
            if np.any(state.Y & ~state.X):
                violations += 1
    state.check_invariants()
    dt = time.time() - t0
    _report("coupling invariants, 1e6 steps (d=2 L=8 p=0.95)",
            violations == 0 and dt < 30, f"{dt:.1f}s, violations={violations}")


# ---------------------------------------------------------------------------
# 3. Exact stationarity on the tiny box
# ---------------------------------------------------------------------------

def test_exact_stationarity_tiny_box():
    t0 = time.time()
    lat = build_box(2, 1)
    worst = 0.0
    for p in (0.5, 0.9, 0.99):
        res = exact_stationary(lat, p)
        worst = max(worst, res.y_marginal_tv, res.x_marginal_tv)
    dt = time.time() - t0
    _report("exact stationarity marginals (L=1, p in {0.5,0.9,0.99})",
            worst < 1e-10 and dt < 5, f"worst TV {worst:.2e}, {dt:.1f}s")


# ---------------------------------------------------------------------------
# 4. Empirical stationarity on the tiny box
# ---------------------------------------------------------------------------

def test_empirical_stationarity_tiny_box():
    t0 = time.time()
    lat = build_box(2, 1)
    report = stationary_chain_check(lat, 0.9, 1_000_000, seed=99, tv_threshold=0.01)
    dt = time.time() - t0
    _report("empirical stationarity (L=1 p=0.9, 1e6 samples, TV<0.01)",
            report.valid and report.passed and dt < 60,
            f"TV={report.tv:.4f}, {dt:.1f}s")


# ---------------------------------------------------------------------------
# 5 + 6. Lemma "P = S+ n S-" and star-connectivity of S+, bundled samples
# ---------------------------------------------------------------------------

def _star_connected_edge_set(lat, edge_set) -> bool:
    edges = set(int(e) for e in edge_set)
    if len(edges) <= 1:
        return True
    start = next(iter(edges))
    seen = {start}
    q = deque((start,))
    while q:
        g = q.popleft()
        for nb in lat.star_neighbors(g):
            nb = int(nb)
            if nb in edges and nb not in seen:
                seen.add(nb)
                q.append(nb)
    return len(seen) == len(edges)


def _full_boundary_star_connected(lat, filled_mask) -> bool:
    """Star-connectivity of the whole external boundary of the filled cluster.

    The boundary-set lemma speaks about the external boundary taken in the
    infinite lattice, which includes edges with one endpoint outside the box;
    the in-box restriction can disconnect (the connecting path may exit the
    box, which the downstream path constructions handle as boundary exits).
    """
    members = {tuple(int(c) for c in lat.vertices[v])
               for v in np.nonzero(filled_mask)[0]}
    mids = []
    for x in members:
        for axis in range(lat.d):
            for sign in (-1, 1):
                y = list(x)
                y[axis] += sign
                if tuple(y) not in members:
                    mids.append(tuple((a + b) / 2 for a, b in zip(x, y)))
    if len(mids) <= 1:
        return True
    mids_arr = np.array(sorted(set(mids)))
    n = len(mids_arr)
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    frontier = [0]
    while frontier:
        i = frontier.pop()
        close = np.abs(mids_arr - mids_arr[i]).max(axis=1) <= 1.0
        new = close & ~seen
        for j in np.nonzero(new)[0]:
            seen[j] = True
            frontier.append(int(j))
    return bool(seen.all())


@pytest.mark.parametrize("d,L,n,seed", [(2, 8, 10_000, 51), (3, 5, 1_000, 52)])
def test_pivotal_equals_boundary_intersection_and_star_connectivity(d, L, n, seed):
    t0 = time.time()
    lat = build_box(d, L)
    eq_fail = conn_fail = 0
    inbox_fail = 0
    for cfg in sample_conditioned(lat, 0.9, n, seed=seed):
        piv = pivotal(cfg)
        via = pivotal_via_sets(cfg)
        if not np.array_equal(piv, via):
            eq_fail += 1
        from percoface.connectivity import filled_cluster

        if not _full_boundary_star_connected(lat, filled_cluster(cfg, "T")):
            conn_fail += 1
        if not _star_connected_edge_set(lat, s_plus(cfg)):
            inbox_fail += 1  # expected occasionally: the path exits the box
    dt = time.time() - t0
    _write_golden(f"boundary_connectivity_{d}d_L{L}.json", {
        "samples": n, "full_boundary_disconnected": conn_fail,
        "in_box_restriction_disconnected": inbox_fail,
    })
    _report(f"P = S+ n S- on {n} conditioned samples (d={d} L={L})",
            eq_fail == 0, f"{dt:.1f}s")
    _report(f"external boundary of O'(T) star-connected (d={d} L={L})",
            conn_fail == 0,
            f"{dt:.1f}s, in-box restriction disconnected in {inbox_fail}/{n}")


# ---------------------------------------------------------------------------
# 7. Pivotal oracle equivalence on 1e5 random disconnected configurations
# ---------------------------------------------------------------------------

def test_pivotal_oracle_equivalence_100k():
    t0 = time.time()
    lat = build_box(2, 4)
    mismatches = 0
    total = 0
    for i, p in enumerate((0.3, 0.5, 0.65, 0.75)):
        rows = sample_disconnected(lat, p, 25_000, seed=700 + i)
        brute = pivotal_bruteforce_batch(lat, rows)
        for row, bmask in zip(rows, brute):
            total += 1
            got = pivotal(Config(lat, row))
            if got.tolist() != np.nonzero(bmask)[0].tolist():
                mismatches += 1
    dt = time.time() - t0
    _report("pivotal oracle equivalence (1e5 random disconnected, d=2 L=4)",
            total == 100_000 and mismatches == 0 and dt < 60,
            f"{dt:.1f}s, mismatches={mismatches}")


# ---------------------------------------------------------------------------
# 8. The comparison inequality for the trimmed semi-distance
# ---------------------------------------------------------------------------

def test_semi_distance_comparison_inequality_10k():
    t0 = time.time()
    lat = build_box(2, 6)
    gen = np.random.Generator(np.random.PCG64(81))
    violations = 0
    for _ in range(10_000):
        A = np.nonzero(gen.random(lat.n_edges) < 0.12)[0]
        B = np.nonzero(gen.random(lat.n_edges) < 0.12)[0]
        ell = float(gen.random() * 4.0)
        lhs = max(hausdorff_semi(lat, A, B, ell), ell)
        rhs = hausdorff_union_boundary(lat, A, B)
        if lhs < rhs - 1e-12:
            violations += 1
    dt = time.time() - t0
    _report("semi-distance comparison inequality (1e4 triples)",
            violations == 0 and dt < 30, f"{dt:.1f}s")


# ---------------------------------------------------------------------------
# 9. STP constructions pass their validators
# ---------------------------------------------------------------------------

def test_stp_constructions_validate():
    t0 = time.time()
    cfg = ExperimentConfig(experiment="stp_validity", d=2, L=6, p=0.95,
                           seed=321, replicas=1, trials=2000)
    res = run_experiment(cfg)
    per = {"decreasing": {"passed": 0, "failed": 0, "skipped": 0},
           "impatient": {"passed": 0, "failed": 0, "skipped": 0}}
    for rec in res["records"]:
        per[rec["constructor"]][rec["status"]] += 1
    dt = time.time() - t0
    ok = all(v["failed"] == 0 and v["passed"] >= 970
             and v["passed"] + v["skipped"] == 1000 for v in per.values())
    _write_golden("stp_validity_2d_L6.json", {"outcomes": per, "config": cfg.as_dict()})
    _report("STP constructors: 1000 trials each, validators 100%",
            ok and dt < 600, f"{dt:.1f}s {per}")


# ---------------------------------------------------------------------------
# 10. Isolation tail decay
# ---------------------------------------------------------------------------

def test_isolation_tail_decay_golden():
    t0 = time.time()
    cfg = ExperimentConfig(experiment="isolation", d=2, L=32, p=0.95,
                           seed=404, replicas=4, samples=2500)
    res = run_experiment(cfg)
    tail = sorted(res["summary"]["tail"], key=lambda r: r["ell"])
    phats = [r["p_hat"] for r in tail]
    monotone = all(a >= b - 1e-12 for a, b in zip(phats, phats[1:]))
    threshold = 4 * cfg.log_lambda
    at_4ll = [r for r in tail if r["ell"] >= threshold - 1e-4]
    below = bool(at_4ll) and all(r["p_hat"] < 1e-2 for r in at_4ll)
    _write_golden("isolation_tail_2d_L32_p095.json", res["summary"])
    dt = time.time() - t0
    _report("isolation tail: monotone, < 1e-2 by 4 ln|Lambda| (1e4 samples, L=32)",
            monotone and below and dt < 1800,
            f"{dt:.1f}s, tail@4ln={at_4ll[0]['p_hat'] if at_4ll else 'n/a'}")


# ---------------------------------------------------------------------------
# 11. Localization growth under an a + b ln^2|Lambda| envelope
# ---------------------------------------------------------------------------

def test_localization_growth_envelope_golden():
    t0 = time.time()
    sizes = []
    q99s = []
    summaries = {}
    for L in (16, 32, 64):
        cfg = ExperimentConfig(experiment="localization", d=2, L=L, p=0.95,
                               seed=505, replicas=3, samples=400)
        res = run_experiment(cfg)
        sizes.append((L + 1) ** 2)
        q99s.append(res["summary"]["percentiles"][99])
        summaries[L] = res["summary"]["percentiles"]
    fit = envelope_fit(sizes, q99s)
    ok = all(m >= -1e-9 for m in fit["margins"]) and fit["b"] >= 0.0
    _write_golden("localization_growth_2d_p095.json",
                  {"sizes": sizes, "q99": q99s, "envelope": fit,
                   "percentiles": summaries})
    dt = time.time() - t0
    _report("localization 99th pct under a + b ln^2|Lambda| envelope (L=16,32,64)",
            ok and dt < 7200, f"{dt:.1f}s, q99={q99s}, fit a={fit['a']:.2f} b={fit['b']:.3f}")


# ---------------------------------------------------------------------------
# 12. Speed statistic
# ---------------------------------------------------------------------------

def test_speed_statistic_golden():
    t0 = time.time()
    cfg = ExperimentConfig(experiment="speed", d=2, L=32, p=0.95,
                           seed=606, replicas=3, samples=400)
    res = run_experiment(cfg)
    threshold = 2 * cfg.d * cfg.log_lambda
    rows = [r for r in res["summary"]["exceedance"] if r["variant"] == "pair"]
    ok = bool(rows) and all(r["p_hat"] < 0.01 for r in rows)
    _write_golden("speed_2d_L32_p095.json", res["summary"])
    dt = time.time() - t0
    _report("speed: P(d_H^ell(P_t, P_t+s) > 2d ln|Lambda|) < 1% per ell",
            ok and dt < 3600,
            f"{dt:.1f}s, threshold={threshold:.1f}, worst={max(r['p_hat'] for r in rows):.4f}")


# ---------------------------------------------------------------------------
# 13. Determinism: manifest re-run reproduces the CSV byte for byte
# ---------------------------------------------------------------------------

def test_manifest_rerun_byte_identical(tmp_path):
    t0 = time.time()
    cfg = ExperimentConfig(experiment="empty_pivotal", d=2, L=4, p=0.95,
                           seed=707, replicas=2, samples=200)
    first = run_experiment(cfg, out_dir=str(tmp_path / "a"))
    again = run_from_manifest(first["paths"]["manifest"], out_dir=str(tmp_path / "b"))
    with open(first["paths"]["csv"], "rb") as fa, open(again["paths"]["csv"], "rb") as fb:
        same = fa.read() == fb.read()
    dt = time.time() - t0
    _report("determinism: byte-identical CSV from manifest re-run", same, f"{dt:.1f}s")

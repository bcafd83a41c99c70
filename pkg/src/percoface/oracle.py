"""Exact ground truth for tiny boxes and brute-force cross-checks.

Configurations are enumerated as edge bitmasks.  The conditioned law comes
from full enumeration of the 2^E configurations, the coupled stationary law
from the exact one-step kernel of the graphical construction, and pivotality
from literal trial opening.  None of this shares code with the label-based
paths it is meant to check: reachability here is frontier search, not
union-find.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .connectivity import Config
from .dynamics import RngStream, burn_in, init_state, step
from .errors import CapExceeded, ContractViolation
from .lattice import BoxLattice


@dataclass
class ExactDistribution:
    """Enumerated states with exact probabilities."""

    states: np.ndarray  # bitmasks (or indices into a state list)
    probs: np.ndarray

    def __post_init__(self):
        if np.any(self.probs < -1e-15):
            raise ContractViolation("negative probability in exact distribution")
        total = kahan_sum(self.probs)
        if abs(total - 1.0) > 1e-12:
            raise ContractViolation(f"probabilities sum to {total}, not 1")

    def prob_of(self, state) -> float:
        hit = np.nonzero(self.states == state)[0]
        return float(self.probs[hit[0]]) if hit.size else 0.0


def kahan_sum(values) -> float:
    """Compensated summation, used for all enumeration mass totals."""
    total = 0.0
    carry = 0.0
    for x in values:
        y = float(x) - carry
        t = total + y
        carry = (t - total) - y
        total = t
    return total


def bits_from_mask(mask: int, n_edges: int) -> np.ndarray:
    return np.array([(mask >> j) & 1 for j in range(n_edges)], dtype=bool)


def mask_from_bits(bits: np.ndarray) -> int:
    mask = 0
    for j in np.nonzero(np.asarray(bits, dtype=bool))[0]:
        mask |= 1 << int(j)
    return mask


def _bfs_connects(lattice: BoxLattice, bits: np.ndarray) -> bool:
    """Breadth-first reachability from the top face to the bottom face."""
    adj = [[] for _ in range(lattice.n_vertices)]
    for e in np.nonzero(bits)[0]:
        u, v = lattice.edges[e]
        adj[u].append(v)
        adj[v].append(u)
    on_bottom = np.zeros(lattice.n_vertices, dtype=bool)
    on_bottom[lattice.bottom] = True
    seen = np.zeros(lattice.n_vertices, dtype=bool)
    q = deque(int(v) for v in lattice.top)
    seen[lattice.top] = True
    while q:
        x = q.popleft()
        if on_bottom[x]:
            return True
        for y in adj[x]:
            if not seen[y]:
                seen[y] = True
                q.append(y)
    return bool(seen[lattice.bottom].any())


def batch_connected(lattice: BoxLattice, open_matrix: np.ndarray) -> np.ndarray:
    """Vectorized top-bottom reachability, one row per configuration.

    Fixed-point iteration of the reach-from-top set; each sweep relaxes every
    edge in both directions across the whole batch.
    """
    open_matrix = np.asarray(open_matrix, dtype=bool)
    n = open_matrix.shape[0]
    reach = np.zeros((n, lattice.n_vertices), dtype=bool)
    reach[:, lattice.top] = True
    us = lattice.edges[:, 0]
    vs = lattice.edges[:, 1]
    while True:
        before = np.count_nonzero(reach)
        for j in range(lattice.n_edges):
            m = open_matrix[:, j]
            u, v = int(us[j]), int(vs[j])
            ru = reach[:, u]
            rv = reach[:, v]
            reach[:, u] = ru | (rv & m)
            reach[:, v] = rv | (reach[:, u] & m)
        if np.count_nonzero(reach) == before:
            break
    return reach[:, lattice.bottom].any(axis=1)


def enumerate_conditioned(lattice: BoxLattice, p: float, cap: int = 20) -> ExactDistribution:
    """The conditioned law: product-Bernoulli(p) restricted to disconnection.

    Iterates all 2^E configurations, keeps the disconnected ones, normalizes
    their product weights.  Refuses above the edge cap.
    """
    n_e = lattice.n_edges
    if n_e > cap:
        raise CapExceeded(
            f"enumeration needs 2^{n_e} configurations; raise cap >= {n_e} to allow",
            required=n_e,
            cap=cap,
        )
    masks = np.arange(2**n_e, dtype=np.int64)
    bit_table = ((masks[:, None] >> np.arange(n_e)) & 1).astype(bool)
    disc = np.zeros(len(masks), dtype=bool)
    chunk = 1 << 16
    for lo in range(0, len(masks), chunk):
        hi = min(lo + chunk, len(masks))
        disc[lo:hi] = ~batch_connected(lattice, bit_table[lo:hi])
    kept = masks[disc]
    n_open = bit_table[disc].sum(axis=1)
    log_w = n_open * math.log(p) + (n_e - n_open) * math.log1p(-p)
    weights = np.exp(log_w)
    total = kahan_sum(weights)
    return ExactDistribution(states=kept, probs=weights / total)


def pivotal_bruteforce(config: Config) -> np.ndarray:
    """Trial-opening pivotality: open each closed edge, test the connection."""
    lat = config.lattice
    if _bfs_connects(lat, config.bits):
        raise ContractViolation("pivotal_bruteforce requires a disconnected configuration")
    out = []
    for e in np.nonzero(~config.bits)[0]:
        trial = config.bits.copy()
        trial[e] = True
        if _bfs_connects(lat, trial):
            out.append(int(e))
    return np.array(out, dtype=np.int64)


def pivotal_bruteforce_batch(lattice: BoxLattice, open_matrix: np.ndarray) -> np.ndarray:
    """Trial-opening pivotality over a batch of disconnected configurations.

    Same semantics as ``pivotal_bruteforce`` row by row, vectorized by
    grouping the trials per opened edge.  Returns a boolean (n, E) matrix.
    """
    open_matrix = np.asarray(open_matrix, dtype=bool)
    n, n_e = open_matrix.shape
    out = np.zeros((n, n_e), dtype=bool)
    for e in range(n_e):
        rows = np.nonzero(~open_matrix[:, e])[0]
        if rows.size == 0:
            continue
        trials = open_matrix[rows].copy()
        trials[:, e] = True
        out[rows, e] = batch_connected(lattice, trials)
    return out


def sample_disconnected(lattice: BoxLattice, p: float, n: int, seed: int) -> np.ndarray:
    """Rejection-sample n product-Bernoulli(p) configurations conditioned on disconnection."""
    gen = np.random.Generator(np.random.PCG64(seed))
    rows = []
    got = 0
    while got < n:
        batch = gen.random((max(256, n), lattice.n_edges)) < p
        keep = ~batch_connected(lattice, batch)
        sel = batch[keep]
        rows.append(sel[: n - got])
        got += min(len(sel), n - got)
    return np.concatenate(rows, axis=0)


# ---------------------------------------------------------------------------
# Exact coupled stationary law
# ---------------------------------------------------------------------------

@dataclass
class CoupledStationary:
    """Stationary law of the exact coupled kernel plus its verification data."""

    pairs: list  # (x_mask, y_mask)
    probs: np.ndarray
    residual: float
    y_marginal_tv: float
    x_marginal_tv: float
    kernel: np.ndarray = field(repr=False, default=None)

    def index(self) -> dict:
        return {pair: i for i, pair in enumerate(self.pairs)}


def _pivotal_masks(lattice: BoxLattice, y_masks: np.ndarray) -> list[int]:
    """Pivotal set of each disconnected configuration, as an edge bitmask."""
    n_e = lattice.n_edges
    bits = ((np.asarray(y_masks)[:, None] >> np.arange(n_e)) & 1).astype(bool)
    piv = pivotal_bruteforce_batch(lattice, bits)
    return [mask_from_bits(row) for row in piv]


def coupled_state_space(lattice: BoxLattice, cap: int = 100_000):
    """All pairs (x, y) with y disconnected and y <= x, as bitmask pairs."""
    n_e = lattice.n_edges
    if 2**n_e > cap:
        # The all-closed y alone contributes 2^E dominating pairs.
        raise CapExceeded(
            f"coupled state space exceeds {cap} states (>= 2^{n_e})",
            required=2**n_e,
            cap=cap,
        )
    y_masks = enumerate_conditioned(lattice, p=0.5, cap=n_e).states  # support only
    total = sum(2 ** (n_e - bin(int(y)).count("1")) for y in y_masks)
    if total > cap:
        raise CapExceeded(
            f"coupled state space has {total} states, above the cap {cap}",
            required=total,
            cap=cap,
        )
    full = (1 << n_e) - 1
    pairs = []
    for y in y_masks:
        y = int(y)
        free = full & ~y
        sub = free
        while True:
            pairs.append((y | sub, y))
            if sub == 0:
                break
            sub = (sub - 1) & free
    return pairs, [int(y) for y in y_masks]


def exact_stationary(lattice: BoxLattice, p: float, cap: int = 100_000) -> CoupledStationary:
    """Stationary vector of the exact coupled kernel, with marginal checks.

    Builds the one-step kernel by averaging the graphical construction over
    the edge choice and the coin, solves the stationary equations directly,
    and verifies the residual (<= 1e-12) plus both marginal identities: the
    second marginal must be the conditioned law and the first the product
    law.
    """
    n_e = lattice.n_edges
    pairs, y_masks = coupled_state_space(lattice, cap)
    index = {pair: i for i, pair in enumerate(pairs)}
    piv = dict(zip(y_masks, _pivotal_masks(lattice, np.array(y_masks))))

    n = len(pairs)
    K = np.zeros((n, n))
    w_open = p / n_e
    w_close = (1.0 - p) / n_e
    for i, (x, y) in enumerate(pairs):
        for e in range(n_e):
            bit = 1 << e
            x_open = x | bit
            y_open = y if (piv[y] & bit) else (y | bit)
            K[i, index[(x_open, y_open)]] += w_open
            K[i, index[(x & ~bit, y & ~bit)]] += w_close

    # Stationary vector: solve (K^T - I) v = 0 with total mass 1, then verify
    # the residual at the documented tolerance.
    A = K.T - np.eye(n)
    A[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    v = np.linalg.solve(A, rhs)
    v = np.clip(v, 0.0, None)
    v /= kahan_sum(v)
    residual = float(np.abs(v @ K - v).sum())
    if residual > 1e-12:
        raise ContractViolation(f"stationary residual {residual:.3e} above 1e-12")

    y_exact = enumerate_conditioned(lattice, p, cap=max(n_e, 20))
    y_prob = {int(s): float(pr) for s, pr in zip(y_exact.states, y_exact.probs)}
    y_emp: dict[int, float] = {}
    x_emp: dict[int, float] = {}
    for (x, y), pr in zip(pairs, v):
        y_emp[y] = y_emp.get(y, 0.0) + pr
        x_emp[x] = x_emp.get(x, 0.0) + pr
    y_tv = 0.5 * sum(
        abs(y_emp.get(y, 0.0) - y_prob.get(y, 0.0)) for y in set(y_emp) | set(y_prob)
    )
    x_tv = 0.5 * sum(
        abs(x_emp.get(x, 0.0) - _product_prob(x, n_e, p)) for x in range(2**n_e)
    )
    return CoupledStationary(
        pairs=pairs,
        probs=v,
        residual=residual,
        y_marginal_tv=y_tv,
        x_marginal_tv=x_tv,
        kernel=K,
    )


def _product_prob(mask: int, n_e: int, p: float) -> float:
    k = bin(mask).count("1")
    return p**k * (1.0 - p) ** (n_e - k)


def y_marginal_kernel(lattice: BoxLattice, p: float) -> tuple[list[int], np.ndarray]:
    """One-step kernel of the conditioned process alone (it is autonomous)."""
    n_e = lattice.n_edges
    y_masks = [int(y) for y in enumerate_conditioned(lattice, p=0.5, cap=n_e).states]
    piv = dict(zip(y_masks, _pivotal_masks(lattice, np.array(y_masks))))
    index = {y: i for i, y in enumerate(y_masks)}
    K = np.zeros((len(y_masks), len(y_masks)))
    for y in y_masks:
        i = index[y]
        for e in range(n_e):
            bit = 1 << e
            y_open = y if (piv[y] & bit) else (y | bit)
            K[i, index[y_open]] += p / n_e
            K[i, index[y & ~bit]] += (1.0 - p) / n_e
    return y_masks, K


# ---------------------------------------------------------------------------
# Empirical-vs-exact comparison harness
# ---------------------------------------------------------------------------

@dataclass
class StationaryReport:
    valid: bool
    n_samples: int
    tv: float
    tv_threshold: float
    chi2: float
    chi2_dof: int
    chi2_critical: float
    chi2_n: int
    chi2_cadence: int
    passed: bool
    seed: int
    burn_steps: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def stationary_chain_check(
    lattice: BoxLattice,
    p: float,
    n_steps: int,
    seed: int,
    burn_multiplier: float = 16.0,
    tv_threshold: float = 0.01,
    chi2_level: float = 0.001,
    cap: int = 100_000,
) -> StationaryReport:
    """Run the live chain on a tiny box and compare against the exact law.

    Total variation is measured over every post-burn-in step; the chi-square
    statistic subsamples every four sweeps (consecutive steps are correlated,
    which would inflate it) against the exact probabilities, at the given
    significance level.  Degenerate runs (n_steps == 0) come back flagged
    invalid rather than raising; the verdict rides in the report.
    """
    from scipy import stats

    exact = exact_stationary(lattice, p, cap=cap)
    if n_steps <= 0:
        return StationaryReport(
            valid=False, n_samples=0, tv=math.nan, tv_threshold=tv_threshold,
            chi2=math.nan, chi2_dof=0, chi2_critical=math.nan, chi2_n=0,
            chi2_cadence=0, passed=False, seed=seed, burn_steps=0,
        )
    index = exact.index()
    rng = RngStream(seed)
    state = init_state(lattice, p, rng)
    burn = burn_in(state, burn_multiplier, rng)
    cadence = 4 * lattice.n_edges
    counts = np.zeros(len(exact.pairs), dtype=np.int64)
    sweep_counts = np.zeros(len(exact.pairs), dtype=np.int64)
    for k in range(n_steps):
        step(state, rng)
        key = (mask_from_bits(state.X), mask_from_bits(state.Y))
        counts[index[key]] += 1
        if (k + 1) % cadence == 0:
            sweep_counts[index[key]] += 1
    emp = counts / counts.sum()
    tv = 0.5 * float(np.abs(emp - exact.probs).sum())
    # Pool states whose expected count is small so the chi-square is sound.
    n_sub = int(sweep_counts.sum())
    expected = exact.probs * n_sub
    big = expected >= 5
    obs = np.append(sweep_counts[big], sweep_counts[~big].sum())
    exp = np.append(expected[big], expected[~big].sum())
    keep = exp > 0
    chi2 = float((((obs - exp) ** 2) / np.where(keep, exp, 1.0))[keep].sum())
    dof = max(1, int(keep.sum()) - 1)
    critical = float(stats.chi2.ppf(1.0 - chi2_level, dof))
    passed = tv < tv_threshold and chi2 < critical
    return StationaryReport(
        valid=True, n_samples=n_steps, tv=tv, tv_threshold=tv_threshold,
        chi2=chi2, chi2_dof=dof, chi2_critical=critical, chi2_n=n_sub,
        chi2_cadence=cadence, passed=passed, seed=seed, burn_steps=burn,
    )


# ---------------------------------------------------------------------------
# Golden files
# ---------------------------------------------------------------------------

def write_golden(path, lattice: BoxLattice, p: float, quantity: str, value, tolerance: float):
    payload = {
        "lattice": {"d": lattice.d, "L": lattice.L},
        "p": p,
        "quantity": quantity,
        "value": value,
        "tolerance": tolerance,
        "generator_version": __version__,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_golden(path) -> dict:
    with open(path) as fh:
        return json.load(fh)

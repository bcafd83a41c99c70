"""The coupled chain: driving stream, veto rule, event log and reconstruction.

One step draws a uniform edge and a Bernoulli(p) coin.  The free process X
simply takes the coin.  The conditioned process Y takes the coin too, except
that an opening which would join the top face to the bottom face is vetoed:
the edge opens in X but stays closed in Y.  Closings apply to both.  This
keeps Y dominated by X and keeps Y inside the disconnection event at every
step.

Connectivity of Y is tracked incrementally: merges on openings, and on
closings a bidirectional search either certifies the cluster is still
connected or identifies the smaller side of the split for relabelling.  Two
virtual nodes stand for the faces so that "connected to the top" is a single
label comparison.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .connectivity import Config
from .errors import ConfigurationError, ContractViolation, WindowTooSmall
from .lattice import BoxLattice


class RngStream:
    """Seeded driving stream: uniform edges and Bernoulli coins.

    The generator algorithm is recorded so outputs can carry it; the draw
    counter gives a cheap notion of stream position for records.
    """

    algorithm = "pcg64"

    def __init__(self, seed: int):
        self.seed = int(seed)
        self.gen = np.random.Generator(np.random.PCG64(self.seed))
        self.n_draws = 0

    def draw_edge(self, n_edges: int) -> int:
        self.n_draws += 1
        return int(self.gen.integers(0, n_edges))

    def draw_coin(self, p: float) -> bool:
        self.n_draws += 1
        return bool(self.gen.random() < p)

    def bernoulli_vector(self, n: int, p: float) -> np.ndarray:
        self.n_draws += n
        return self.gen.random(n) < p


@dataclass(slots=True)
class UpdateEvent:
    """One step of the driving stream and its effect on Y.

    ``y_outcome`` is "closed" for a closing coin, "opened" when the opening
    went through in Y, and "veto" when it was blocked; a veto can only happen
    on an opening coin whose edge would join the faces.
    """

    t: int
    edge: int
    coin: bool
    y_outcome: str


class _FaceClusters:
    """Incremental open-cluster labels for Y with virtual face nodes.

    Node n_vertices stands for the whole top face, node n_vertices+1 for the
    bottom face; permanent pseudo-edges tie them to their faces, so cluster
    membership of a face is one label lookup.
    """

    def __init__(self, lattice: BoxLattice, bits: np.ndarray):
        self.lattice = lattice
        n = lattice.n_vertices
        self.vt = n
        self.vb = n + 1
        self.adj = [set() for _ in range(n + 2)]
        for v in lattice.top:
            self.adj[self.vt].add(int(v))
            self.adj[int(v)].add(self.vt)
        for v in lattice.bottom:
            self.adj[self.vb].add(int(v))
            self.adj[int(v)].add(self.vb)
        self.labels = np.arange(n + 2, dtype=np.int64)
        self.members = {i: {i} for i in range(n + 2)}
        self._next = n + 2
        for v in lattice.top:
            self._merge(self.vt, int(v))
        for v in lattice.bottom:
            self._merge(self.vb, int(v))
        for e in np.nonzero(bits)[0]:
            u, v = lattice.edges[e]
            self.open_edge(int(u), int(v))

    def _merge(self, u: int, v: int):
        lu = int(self.labels[u])
        lv = int(self.labels[v])
        if lu == lv:
            return
        if len(self.members[lu]) < len(self.members[lv]):
            src, dst = lu, lv
        else:
            src, dst = lv, lu
        moving = self.members.pop(src)
        for x in moving:
            self.labels[x] = dst
        self.members[dst] |= moving

    def open_edge(self, u: int, v: int):
        self.adj[u].add(v)
        self.adj[v].add(u)
        self._merge(u, v)

    def close_edge(self, u: int, v: int):
        self.adj[u].discard(v)
        self.adj[v].discard(u)
        # Bidirectional search: either the endpoints are still connected, or
        # the side that exhausts first is the split-off component.
        seen_u, seen_v = {u}, {v}
        qu, qv = deque((u,)), deque((v,))
        while qu and qv:
            if len(seen_u) <= len(seen_v):
                q, seen, other = qu, seen_u, seen_v
            else:
                q, seen, other = qv, seen_v, seen_u
            x = q.popleft()
            for y in self.adj[x]:
                if y in other:
                    return
                if y not in seen:
                    seen.add(y)
                    q.append(y)
        side = seen_u if not qu else seen_v
        old = int(self.labels[next(iter(side))])
        new = self._next
        self._next += 1
        for x in side:
            self.labels[x] = new
        self.members[old] -= side
        self.members[new] = side

    def would_connect(self, u: int, v: int) -> bool:
        lt = self.labels[self.vt]
        lb = self.labels[self.vb]
        lu = self.labels[u]
        lv = self.labels[v]
        return (lu == lt and lv == lb) or (lu == lb and lv == lt)

    def disconnected(self) -> bool:
        return self.labels[self.vt] != self.labels[self.vb]


@dataclass
class CoupledState:
    """The pair (X, Y) at the current step, with live Y cluster labels."""

    lattice: BoxLattice
    p: float
    X: np.ndarray
    Y: np.ndarray
    t: int = 0
    clusters: _FaceClusters = None

    def __post_init__(self):
        if self.clusters is None:
            self.clusters = _FaceClusters(self.lattice, self.Y)

    def x_config(self) -> Config:
        return Config(self.lattice, self.X.copy())

    def y_config(self) -> Config:
        return Config(self.lattice, self.Y.copy())

    def check_invariants(self):
        """Full sweep of the two state invariants; raises on violation."""
        if np.any(self.Y & ~self.X):
            bad = np.nonzero(self.Y & ~self.X)[0]
            raise ContractViolation(f"domination broken at edges {bad.tolist()} (t={self.t})")
        if not self.clusters.disconnected():
            raise ContractViolation(f"Y connects the faces at t={self.t}")


def init_state(lattice: BoxLattice, p: float, rng: RngStream) -> CoupledState:
    """Fresh coupled state: Y all closed, X product-Bernoulli(p).

    The all-closed Y trivially realizes the disconnection event and is
    dominated by any X.
    """
    if not 0.0 < p < 1.0:
        raise ConfigurationError(f"p must lie in (0, 1), got {p}")
    X = rng.bernoulli_vector(lattice.n_edges, p)
    Y = np.zeros(lattice.n_edges, dtype=bool)
    return CoupledState(lattice=lattice, p=p, X=X, Y=Y, t=0)


def step(state: CoupledState, rng: RngStream, history: "History" = None) -> UpdateEvent:
    """Apply one update of the graphical construction; total function."""
    lat = state.lattice
    e = rng.draw_edge(lat.n_edges)
    b = rng.draw_coin(state.p)
    u = int(lat.edges[e, 0])
    v = int(lat.edges[e, 1])
    if b:
        state.X[e] = True
        if state.Y[e]:
            outcome = "opened"
        elif state.clusters.would_connect(u, v):
            outcome = "veto"
        else:
            state.Y[e] = True
            state.clusters.open_edge(u, v)
            outcome = "opened"
    else:
        state.X[e] = False
        if state.Y[e]:
            state.Y[e] = False
            state.clusters.close_edge(u, v)
        outcome = "closed"
    state.t += 1
    ev = UpdateEvent(state.t, e, b, outcome)
    if history is not None:
        history.record(state, ev)
    return ev


@dataclass
class RunSummary:
    steps: int
    t_final: int
    outcomes: dict
    invariant_checks: int


def run(
    state: CoupledState,
    n_steps: int,
    rng: RngStream,
    observers=(),
    history: "History" = None,
    check_invariants_every: int = 0,
) -> RunSummary:
    """Advance the chain n_steps, driving observers at their cadences.

    ``observers`` is a sequence of (cadence, fn) pairs; fn(state, step) runs
    whenever the step counter is a multiple of cadence.  An observer failure
    aborts with the step index and seed in the message.
    """
    if n_steps < 0:
        raise ConfigurationError("n_steps must be >= 0")
    counts = {"closed": 0, "opened": 0, "veto": 0}
    checks = 0
    for _ in range(n_steps):
        ev = step(state, rng, history)
        counts[ev.y_outcome] += 1
        if check_invariants_every and state.t % check_invariants_every == 0:
            state.check_invariants()
            checks += 1
        for cadence, fn in observers:
            if state.t % cadence == 0:
                try:
                    fn(state, state.t)
                except Exception as exc:
                    raise RuntimeError(
                        f"observer {fn!r} failed at step {state.t} (seed {rng.seed})"
                    ) from exc
    return RunSummary(steps=n_steps, t_final=state.t, outcomes=counts, invariant_checks=checks)


def burn_in(state: CoupledState, c_b: float, rng: RngStream, history: "History" = None) -> int:
    """Run ceil(c_b * N_E * ln N_E) steps (coupon-collector scale); returns steps used."""
    if c_b < 1:
        raise ConfigurationError(f"burn-in multiplier must be >= 1, got {c_b}")
    n_e = state.lattice.n_edges
    steps = math.ceil(c_b * n_e * math.log(n_e))
    run(state, steps, rng, history=history)
    return steps


def burn_in_diagnostic(
    state: CoupledState,
    c_b: float,
    rng: RngStream,
    observable=None,
    n_bins: int = 12,
) -> dict:
    """Empirical burn-in adequacy check.

    Runs 3 burn-in windows and compares the observable's histogram between
    the second window [T_b, 2T_b] and the third [2T_b, 3T_b]; if the chain
    had not settled after the first window the two histograms drift apart.
    Returns the windows' histograms plus the total-variation distance between
    them.  Burn-in adequacy is empirical; callers surface this value instead
    of assuming stationarity silently.
    """
    if observable is None:
        observable = lambda s: int(s.Y.sum())
    t_b = burn_in(state, c_b, rng)
    windows = []
    for _ in range(2):
        vals = []
        for _ in range(t_b):
            step(state, rng)
            vals.append(observable(state))
        windows.append(vals)
    lo = min(min(w) for w in windows)
    hi = max(max(w) for w in windows) + 1
    edges = np.linspace(lo, hi, n_bins + 1)
    h1, _ = np.histogram(windows[0], bins=edges)
    h2, _ = np.histogram(windows[1], bins=edges)
    tv = 0.5 * float(np.abs(h1 / h1.sum() - h2 / h2.sum()).sum())
    return {
        "burn_steps": t_b,
        "window_tv": tv,
        "hist_mid": h1.tolist(),
        "hist_late": h2.tolist(),
        "bin_edges": edges.tolist(),
    }


class History:
    """Replayable window of the chain: events plus periodic snapshots.

    Reconstruction of (X_r, Y_r) replays the logged events from the nearest
    snapshot at or before r; the veto decision is logged, so replay needs no
    connectivity.  The retained window is [window_start, t]: events older
    than ``window`` steps are dropped, along with snapshots no longer needed
    as replay anchors.
    """

    def __init__(self, state: CoupledState, window: int, snapshot_every: int = 0):
        self.lattice = state.lattice
        self.window = int(window)
        self.snapshot_every = int(snapshot_every) or state.lattice.n_edges
        self._events: list[UpdateEvent] = []
        self._first_step = state.t + 1
        self._snaps: dict[int, tuple[np.ndarray, np.ndarray]] = {
            state.t: (state.X.copy(), state.Y.copy())
        }
        self._t = state.t
        self._derived_cache: dict = {}

    @property
    def t(self) -> int:
        return self._t

    def window_start(self) -> int:
        return min(self._snaps)

    def record(self, state: CoupledState, ev: UpdateEvent):
        if ev.t != self._t + 1:
            raise ContractViolation(f"event at t={ev.t} recorded out of order (history at {self._t})")
        self._events.append(ev)
        self._t = ev.t
        if self._t % self.snapshot_every == 0:
            self._snaps[self._t] = (state.X.copy(), state.Y.copy())
            self._prune()

    def _prune(self):
        floor = self._t - self.window
        anchors = sorted(self._snaps)
        keep_from = anchors[0]
        for s in anchors:
            if s <= floor:
                keep_from = s
            else:
                break
        for s in anchors:
            if s < keep_from:
                del self._snaps[s]
        drop = keep_from - self._first_step + 1
        if drop > 0:
            self._events = self._events[drop:]
            self._first_step = keep_from + 1
        if self._derived_cache:
            self._derived_cache = {
                k: v for k, v in self._derived_cache.items() if k[1] >= keep_from
            }

    def event_at(self, r: int) -> UpdateEvent:
        """The update applied at step r (the draw (E_r, B_r))."""
        i = r - self._first_step
        if i < 0 or i >= len(self._events):
            raise WindowTooSmall(f"step {r} outside retained event window "
                                 f"[{self._first_step}, {self._t}]")
        return self._events[i]

    def reconstruct(self, r: int) -> tuple[np.ndarray, np.ndarray]:
        """Bit-exact (X_r, Y_r) for any r in the retained window."""
        if r > self._t or r < self.window_start():
            raise WindowTooSmall(f"step {r} outside retained window "
                                 f"[{self.window_start()}, {self._t}]")
        anchor = max(s for s in self._snaps if s <= r)
        X, Y = (a.copy() for a in self._snaps[anchor])
        for rr in range(anchor + 1, r + 1):
            ev = self.event_at(rr)
            if ev.coin:
                X[ev.edge] = True
                Y[ev.edge] = ev.y_outcome == "opened"
            else:
                X[ev.edge] = False
                Y[ev.edge] = False
        return X, Y

    def x_at(self, r: int) -> Config:
        return Config(self.lattice, self.reconstruct(r)[0])

    def y_at(self, r: int) -> Config:
        return Config(self.lattice, self.reconstruct(r)[1])

    def _derived(self, kind: str, r: int, fn):
        key = (kind, r)
        if key not in self._derived_cache:
            self._derived_cache[key] = fn()
        return self._derived_cache[key]

    def pivotal_at(self, r: int) -> np.ndarray:
        from .observables import pivotal

        return self._derived("P", r, lambda: pivotal(self.y_at(r)))

    def interface_at(self, r: int) -> np.ndarray:
        from .observables import interface_of_bits

        return self._derived(
            "I", r, lambda: interface_of_bits(*self.reconstruct(r))
        )

    def s_plus_at(self, r: int) -> np.ndarray:
        from .observables import s_plus

        return self._derived("S+", r, lambda: s_plus(self.y_at(r)))

    def dump_events(self, fh):
        """Debug dump, one record per line: t,edge_index,coin,y_outcome."""
        for ev in self._events:
            fh.write(f"{ev.t},{ev.edge},{int(ev.coin)},{ev.y_outcome}\n")


def reconstruct(history: History, r: int) -> tuple[Config, Config]:
    """(X_r, Y_r) as configurations; range error outside the window."""
    X, Y = history.reconstruct(r)
    return Config(history.lattice, X), Config(history.lattice, Y)

"""Space-time paths: validity predicates and the two backward constructions.

A space-time path is a sequence of (edge, time) pairs where consecutive pairs
either share the edge (a time change) or share the time across star-adjacent
edges (a spatial move; these paths live on the closed/star relation).  The
two constructors walk backwards from a pivotal edge:

* the decreasing closed construction hops along the in-box boundary set of
  the top cluster at a fixed time, then rides the birth time of the oldest
  pivotal edge further into the past, and is finally simplified;
* the impatient construction follows the boundary set toward the box
  boundary, stops at the first interface-or-formerly-pivotal edge, jumps to
  the last time that edge agreed in X and Y, and is then simplified and
  impatience-modified.

Validators are deliberately independent of the constructors: they only read
reconstructed states and the logged driving stream.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .dynamics import History
from .errors import ContractViolation, WindowTooSmall


@dataclass
class SpaceTimePath:
    """Sequence of time-edges, with the closed/star flavour by default."""

    steps: list  # [(edge, time), ...]
    star: bool = True
    boundary_exit: bool = False

    def __len__(self):
        return len(self.steps)

    @property
    def edges(self):
        return [e for e, _ in self.steps]

    @property
    def times(self):
        return [t for _, t in self.steps]

    def time_change_indices(self):
        es = self.edges
        return [i for i in range(len(es) - 1) if es[i] == es[i + 1]]

    def space_projection(self):
        """Edge sequence with one edge removed per time change."""
        es = self.edges
        n = len(es)
        m = len(self.time_change_indices())
        out = []
        phi = 0
        for _ in range(n - m):
            out.append(es[phi])
            if phi + 1 < n and es[phi] == es[phi + 1]:
                phi += 2
            else:
                phi += 1
        return out

    @property
    def length(self) -> int:
        return len(self.steps) - len(self.time_change_indices())

    @property
    def support(self) -> set:
        return set(self.space_projection())

    def well_formed(self, lattice) -> bool:
        """Consecutive pairs share the edge, or share the time across neighbours."""
        for (e1, t1), (e2, t2) in zip(self.steps, self.steps[1:]):
            if e1 == e2:
                continue
            if t1 != t2:
                return False
            neigh = lattice.star_neighbors(e1)
            if not self.star:
                u1, v1 = lattice.edges[e1]
                u2, v2 = lattice.edges[e2]
                if len({int(u1), int(v1)} & {int(u2), int(v2)}) == 0:
                    return False
                continue
            if e2 not in neigh:
                return False
        return True

    def to_json(self) -> list:
        out = []
        for i, (e, t) in enumerate(self.steps):
            if i + 1 == len(self.steps):
                kind = "end"
            elif self.steps[i + 1][0] == e:
                kind = "time"
            else:
                kind = "space"
            out.append({"edge_index": int(e), "t": int(t), "move_kind": kind})
        return out


def normalize_steps(steps) -> list:
    """Drop exact duplicates and merge runs of time changes on one edge.

    Intended for monotone sequences; a run (e,t1),(e,t2),(e,t3) becomes
    (e,t1),(e,t3).
    """
    out = []
    for e, t in steps:
        if out and out[-1] == (e, t):
            continue
        if len(out) >= 2 and out[-1][0] == e and out[-2][0] == e:
            out[-1] = (e, t)
        else:
            out.append((e, t))
    return out


# ---------------------------------------------------------------------------
# Edge-state tracking against a history window
# ---------------------------------------------------------------------------

def _edge_track(history: History, e: int, lo: int, hi: int):
    """States (x_r(e), y_r(e)) for r in [lo, hi], replayed from the window."""
    X, Y = history.reconstruct(lo)
    xs = [bool(X[e])]
    ys = [bool(Y[e])]
    for r in range(lo + 1, hi + 1):
        ev = history.event_at(r)
        if ev.edge == e:
            xs.append(bool(ev.coin))
            ys.append(ev.y_outcome == "opened")
        else:
            xs.append(xs[-1])
            ys.append(ys[-1])
    return xs, ys


def _states(history, e, lo, hi, process):
    xs, ys = _edge_track(history, e, lo, hi)
    return xs if process == "X" else ys


# ---------------------------------------------------------------------------
# Predicates
# ---------------------------------------------------------------------------

def is_decreasing(stp: SpaceTimePath) -> bool:
    ts = stp.times
    return all(a >= b for a, b in zip(ts, ts[1:]))


def is_increasing(stp: SpaceTimePath) -> bool:
    ts = stp.times
    return all(a <= b for a, b in zip(ts, ts[1:]))


def is_closed_in(stp: SpaceTimePath, history: History, process: str) -> bool:
    """Every visited time-edge closed, every time-change interval fully closed."""
    for e, t in stp.steps:
        if _states(history, e, t, t, process)[0]:
            return False
    for i in stp.time_change_indices():
        e = stp.steps[i][0]
        lo = min(stp.steps[i][1], stp.steps[i + 1][1])
        hi = max(stp.steps[i][1], stp.steps[i + 1][1])
        if any(_states(history, e, lo, hi, process)):
            return False
    return True


def is_simple(stp: SpaceTimePath, history: History, process: str) -> bool:
    """Nonadjacent revisits of an edge must see it open strictly inside the gap.

    Literal reading: for indices i, j with |i-j| != 1, e_i = e_j and
    t_i < t_j, the edge must be open at some time in ]t_i, t_j].
    """
    steps = stp.steps
    n = len(steps)
    for i in range(n):
        for j in range(n):
            if abs(i - j) == 1 or i == j:
                continue
            (ei, ti), (ej, tj) = steps[i], steps[j]
            if ei != ej or not ti < tj:
                continue
            if not any(_states(history, ei, ti + 1, tj, process)):
                return False
    return True


def is_impatient(stp: SpaceTimePath, history: History) -> bool:
    """Every non-terminal time change ends just before an update of its edge."""
    steps = stp.steps
    for i in range(len(steps) - 2):
        e, _ = steps[i]
        e2, t2 = steps[i + 1]
        if e != e2:
            continue
        if history.event_at(t2 + 1).edge != e2:
            return False
    return True


def is_x_closed_moving(
    stp: SpaceTimePath, history: History, except_edge: int = None, process: str = "X"
) -> bool:
    """Edges departing a spatial move are closed in the given process."""
    steps = stp.steps
    for i in range(len(steps) - 1):
        (e, t), (e2, _) = steps[i], steps[i + 1]
        if e == e2 or e == except_edge:
            continue
        if _states(history, e, t, t, process)[0]:
            return False
    return True


# ---------------------------------------------------------------------------
# Star-path search inside an edge set at a fixed time
# ---------------------------------------------------------------------------

def _star_path(lattice, member_mask: np.ndarray, src: int, target: int = None):
    """Shortest star path inside an edge set, deterministic tie-breaking.

    With a target: returns (path, True) when reachable, else the path to the
    nearest boundary-meeting edge of the searched component with False.
    Without one: aims directly at the nearest boundary-meeting edge.
    Neighbour expansion is in ascending edge order, so shortest paths are
    reproducible.
    """
    if not member_mask[src]:
        raise ContractViolation(f"path source {src} not in the ambient edge set")
    parent = {src: None}
    first_boundary = src if lattice.meets_boundary(src) else None
    if target is None and first_boundary is not None:
        return [src], True
    if target == src:
        return [src], True
    q = deque((src,))
    while q:
        g = q.popleft()
        for nb in lattice.star_neighbors(g):
            nb = int(nb)
            if nb in parent or not member_mask[nb]:
                continue
            parent[nb] = g
            if target is not None and nb == target:
                return _unwind(parent, nb), True
            if first_boundary is None and lattice.meets_boundary(nb):
                first_boundary = nb
                if target is None:
                    return _unwind(parent, nb), True
            q.append(nb)
    if first_boundary is None:
        raise ContractViolation(
            "searched component reaches neither the target nor the box boundary"
        )
    return _unwind(parent, first_boundary), False


def _unwind(parent, node):
    path = [node]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    return path[::-1]


def _mask_of(lattice, edge_set) -> np.ndarray:
    mask = np.zeros(lattice.n_edges, dtype=bool)
    mask[np.asarray(edge_set, dtype=np.int64)] = True
    return mask


# ---------------------------------------------------------------------------
# The decreasing closed construction
# ---------------------------------------------------------------------------

def construct_decreasing_stp(
    history: History, e: int, t: int, s: int, target: int = None
) -> SpaceTimePath:
    """Decreasing simple STP closed in Y from (e, t) down to the pivotal set at s.

    Follows the birth-time recursion of the oldest pivotal edge.  Ends at an
    edge pivotal at s (the given target when supplied), or exits at the first
    edge meeting the box boundary when the in-box boundary set disconnects;
    the result then carries ``boundary_exit``.
    """
    lat = history.lattice
    _check_window(history, s, t)
    piv_cache: dict[int, set] = {}

    def piv(r) -> set:
        if r not in piv_cache:
            piv_cache[r] = set(int(x) for x in history.pivotal_at(r))
        return piv_cache[r]

    if e not in piv(t):
        raise ContractViolation(f"edge {e} is not pivotal at t={t}")
    for r in range(s, t + 1):
        if not piv(r):
            raise ContractViolation(f"pivotal set empty at r={r} inside [{s}, {t}]")
    if target is not None and target not in piv(s):
        raise ContractViolation(f"target edge {target} is not pivotal at s={s}")

    def birth(eps, u) -> int:
        r = u
        while r > s and eps in piv(r - 1):
            r -= 1
        return r  # == s means the stretch covers [s, u]

    steps = [(e, t)]
    u, cur = t, e
    boundary_exit = False
    while True:
        births = {eps: birth(eps, u) for eps in piv(u)}
        theta = min(births.values())
        e_next = min(eps for eps, b in births.items() if b == theta)
        path, reached = _star_path(lat, _mask_of(lat, history.s_plus_at(u)), cur, e_next)
        steps.extend((g, u) for g in path[1:])
        if not reached:
            boundary_exit = True
            break
        if theta <= s:
            steps.append((e_next, s))
            if target is not None and target != e_next:
                path2, reached2 = _star_path(
                    lat, _mask_of(lat, history.s_plus_at(s)), e_next, target
                )
                steps.extend((g, s) for g in path2[1:])
                boundary_exit = not reached2
            break
        if not theta < u:
            raise ContractViolation(f"birth recursion failed to decrease at u={u}")
        steps.append((e_next, theta))
        u, cur = theta, e_next

    stp = SpaceTimePath(normalize_steps(steps), star=True, boundary_exit=boundary_exit)
    return simplify(stp, history, "Y")


def simplify(stp: SpaceTimePath, history: History, process: str) -> SpaceTimePath:
    """Collapse closed-gap revisits into single time changes (three-case scan).

    For each edge in turn: if it is never revisited, or the first revisit has
    the edge open somewhere strictly inside the time gap, move on; otherwise
    delete everything strictly between the two visits and continue from the
    revisit.  Runs of time changes created by a deletion are merged on the
    spot.
    """
    steps = normalize_steps(stp.steps)
    i = 0
    while i < len(steps):
        e_i, t_i = steps[i]
        k = None
        for j in range(i + 2, len(steps)):
            if steps[j][0] == e_i:
                k = j
                break
        if k is None:
            i += 1
            continue
        t_k = steps[k][1]
        lo, hi = min(t_i, t_k), max(t_i, t_k)
        open_inside = any(_states(history, e_i, lo, hi, process)[1:-1]) if hi > lo + 1 else False
        if open_inside:
            i += 1
            continue
        del steps[i + 1 : k]
        while i + 2 < len(steps) and steps[i + 2][0] == e_i:
            del steps[i + 1]
        while i >= 1 and steps[i - 1][0] == e_i:
            del steps[i]
            i -= 1
        i += 1
    return SpaceTimePath(normalize_steps(steps), star=stp.star, boundary_exit=stp.boundary_exit)


# ---------------------------------------------------------------------------
# The impatient construction
# ---------------------------------------------------------------------------

def construct_impatient_stp(history: History, e: int, t: int, s: int) -> SpaceTimePath:
    """Decreasing simple impatient STP, closed-moving in X except on e.

    Walks the in-box boundary set toward the box boundary, lands on the first
    interface-or-previously-pivotal edge, and jumps to the last time that
    edge agreed in X and Y; repeats until the landing time falls at or below
    s, then simplifies and applies the impatient modification.  Raises
    WindowTooSmall when an agreement time lies below the retained window.
    """
    lat = history.lattice
    _check_window(history, s, t)
    if e not in set(int(x) for x in history.pivotal_at(t)):
        raise ContractViolation(f"edge {e} is not pivotal at t={t}")

    steps = [(e, t)]
    u, cur = t, e
    boundary_exit = False
    while True:
        path, _ = _star_path(lat, _mask_of(lat, history.s_plus_at(u)), cur, None)
        land = set(int(x) for x in history.interface_at(u))
        land |= set(int(x) for x in history.pivotal_at(u - 1))
        land.discard(e)
        j_star = next((j for j, g in enumerate(path) if g in land), None)
        if j_star is None:
            steps.extend((g, u) for g in path[1:])
            boundary_exit = True
            break
        steps.extend((g, u) for g in path[1 : j_star + 1])
        e_next = path[j_star]
        eta = _last_agreement(history, e_next, u)
        if eta <= s:
            steps.append((e_next, s))
            break
        if not eta < u:
            raise ContractViolation(f"agreement recursion failed to decrease at u={u}")
        steps.append((e_next, eta))
        u, cur = eta, e_next

    stp = SpaceTimePath(normalize_steps(steps), star=True, boundary_exit=boundary_exit)
    stp = simplify(stp, history, "X")
    return impatient_modify(stp, history, except_edge=e)


def _last_agreement(history: History, e: int, u: int) -> int:
    """max r < u with X_r(e) = Y_r(e); WindowTooSmall when none is retained.

    Scans backwards in growing blocks since agreements are typically recent.
    """
    lo_limit = history.window_start()
    hi = u - 1
    span = 64
    while hi >= lo_limit:
        lo = max(lo_limit, hi - span)
        xs, ys = _edge_track(history, e, lo, hi)
        for r in range(hi, lo - 1, -1):
            if xs[r - lo] == ys[r - lo]:
                return r
        hi = lo - 1
        span *= 4
    raise WindowTooSmall(
        f"edge {e} has no X/Y agreement in the retained window below t={u}"
    )


def impatient_modify(stp: SpaceTimePath, history: History, except_edge: int = None) -> SpaceTimePath:
    """Rewrite time changes so each ends right before an update of its edge.

    Case analysis on the maximal X-closed interval [alpha, beta] around the
    bottom of the time change: when the edge stays closed past the top, the
    time change is dropped in favour of a spatial move at the top time; when
    it reopens earlier, the time change is cut at beta, where the following
    update is the reopening itself.  A time change whose bottom is open in X
    can only sit on the exempt edge, and its bottom is then itself preceded
    only by closed states, making the following update the reopening; it is
    left alone.
    """
    steps = normalize_steps(stp.steps)
    k = 0
    while k + 1 < len(steps):
        e_k, t_k = steps[k]
        e_k1, t_k1 = steps[k + 1]
        if e_k1 != e_k or t_k1 == t_k:
            k += 1
            continue
        if k + 1 == len(steps) - 1:
            break  # terminal time change is exempt from impatience
        if _states(history, e_k1, t_k1, t_k1, "X")[0]:
            k += 1
            continue
        beta = _closed_end(history, e_k1, t_k1)
        e_k2, t_k2 = steps[k + 2]
        chained = k + 3 < len(steps) and steps[k + 3][0] == e_k2
        if beta >= t_k:
            if chained:
                t_k3 = steps[k + 3][1]
                steps[k + 1 : k + 4] = [(e_k2, t_k), (e_k2, t_k3)]
            else:
                steps[k + 1] = (e_k2, t_k)
            k += 1
        else:
            if chained:
                steps[k + 1 : k + 3] = [(e_k, beta), (e_k2, beta)]
            else:
                steps[k + 1 : k + 2] = [(e_k, beta), (e_k2, beta)]
            k += 2
        steps = _dedup_adjacent(steps)
    return SpaceTimePath(normalize_steps(steps), star=stp.star, boundary_exit=stp.boundary_exit)


def _dedup_adjacent(steps):
    out = [steps[0]]
    for pair in steps[1:]:
        if pair != out[-1]:
            out.append(pair)
    return out


def _closed_end(history: History, e: int, t0: int) -> int:
    """Largest beta with X closed on [t0, beta], clipped at the window top."""
    hi_limit = history.t
    beta = t0
    lo = t0
    span = 64
    while lo <= hi_limit:
        hi = min(hi_limit, lo + span)
        xs, _ = _edge_track(history, e, lo, hi)
        for idx in range(1 if lo == t0 else 0, hi - lo + 1):
            if xs[idx]:
                return beta
            beta = lo + idx
        lo = hi + 1
        span *= 4
    return beta


def _check_window(history: History, s: int, t: int):
    if not s < t:
        raise ContractViolation(f"need s < t, got s={s}, t={t}")
    if s < history.window_start() or t > history.t:
        raise WindowTooSmall(
            f"[{s}, {t}] outside retained window [{history.window_start()}, {history.t}]"
        )

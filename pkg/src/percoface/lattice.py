"""Geometry of the box: vertices, edges, star adjacency, faces, distances.

The box is the set of integer points of [0, L]^d.  Edges are unordered pairs
of vertices at Euclidean distance 1 with both endpoints inside the box, so an
edge is identified with the unit segment between its endpoints and with the
midpoint of that segment.  Two edges are star neighbours when their midpoints
are at sup-norm distance at most 1; closed paths and the cut machinery run on
that relation, open paths run on the usual shared-endpoint relation.

Edge ordering is deterministic: vertices are enumerated lexicographically and
each vertex emits its +axis edges in axis order.  All distance helpers work on
midpoints, which is an O(1) proxy for segment distance (off by at most one
lattice unit, absorbed by every threshold used downstream).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

def alpha(d: int) -> int:
    """Count of star neighbours of an interior edge: 3^d + 4(d-1)3^(d-2) - 1."""
    return 3**d + 4 * (d - 1) * 3 ** (d - 2) - 1


def edge_count(d: int, L: int) -> int:
    """Closed-form edge count of the box: d * L * (L+1)^(d-1)."""
    return d * L * (L + 1) ** (d - 1)


# Offsets (vertex delta, other axis) such that the edge at x+delta with the
# given axis is a star neighbour of the edge at x with axis a.  Cached per
# (d, a, b) since the table only depends on dimension and the two axes.
_STAR_OFFSETS: dict[tuple[int, int, int], list[tuple[int, ...]]] = {}


def _star_offsets(d: int, a: int, b: int) -> list[tuple[int, ...]]:
    key = (d, a, b)
    if key not in _STAR_OFFSETS:
        ranges = []
        for i in range(d):
            # Midpoint delta along axis i is o_i + (1[i==b] - 1[i==a]) / 2 and
            # must lie in [-1, 1].
            shift = (0.5 if i == b else 0.0) - (0.5 if i == a else 0.0)
            ranges.append([o for o in (-1, 0, 1) if abs(o + shift) <= 1.0])
        offs = [t for t in itertools.product(*ranges)]
        if a == b:
            offs.remove((0,) * d)  # the edge itself
        _STAR_OFFSETS[key] = offs
    return _STAR_OFFSETS[key]


@dataclass
class BoxLattice:
    """Immutable geometry of the box [0, L]^d.

    Vertices and edges are integer-indexed; ``edges[k]`` holds the two vertex
    indices of edge k with the lower index first.  ``top`` and ``bottom`` are
    the vertex index arrays of the faces where the last coordinate equals L
    and 0 respectively.
    """

    d: int
    L: int
    vertices: np.ndarray  # (n_vertices, d) int
    edges: np.ndarray  # (n_edges, 2) vertex indices
    edge_axis: np.ndarray  # (n_edges,) axis of each edge
    midpoints: np.ndarray  # (n_edges, d) float
    top: np.ndarray
    bottom: np.ndarray
    _edge_lookup: dict = field(repr=False, default_factory=dict)
    _star_cache: dict = field(repr=False, default_factory=dict)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def vertex_count(self) -> int:
        """|Lambda|: cardinality of the box's integer points, (L+1)^d."""
        return (self.L + 1) ** self.d

    def vertex_id(self, coord) -> int:
        """Mixed-radix index of a vertex, first coordinate most significant."""
        idx = 0
        for c in coord:
            idx = idx * (self.L + 1) + int(c)
        return idx

    def edge_id(self, x, y) -> int:
        """Edge index of the pair {x, y} given as coordinate tuples."""
        return self._edge_lookup[(self.vertex_id(x), self.vertex_id(y))]

    def star_neighbors(self, e: int) -> np.ndarray:
        """All edges f != e of the box with ||m_e - m_f||_inf <= 1, sorted."""
        cached = self._star_cache.get(e)
        if cached is not None:
            return cached
        if not 0 <= e < self.n_edges:
            raise IndexError(f"edge index {e} outside [0, {self.n_edges})")
        a = int(self.edge_axis[e])
        x = self.vertices[self.edges[e, 0]]
        out = []
        for b in range(self.d):
            for off in _star_offsets(self.d, a, b):
                y = x + np.asarray(off)
                if np.any(y < 0) or y[b] >= self.L or np.any(y > self.L):
                    continue
                yid = self.vertex_id(y)
                z = y.copy()
                z[b] += 1
                f = self._edge_lookup.get((yid, self.vertex_id(z)))
                if f is not None:
                    out.append(f)
        res = np.array(sorted(out), dtype=np.int64)
        self._star_cache[e] = res
        return res

    def edge_distance(self, e: int, f: int) -> float:
        """Euclidean distance between the midpoints of e and f."""
        return float(np.linalg.norm(self.midpoints[e] - self.midpoints[f]))

    def distance_to_boundary(self, e: int) -> float:
        """Distance from the midpoint of e to the complement of [0, L]^d."""
        m = self.midpoints[e]
        return float(min(m.min(), (self.L - m).min()))

    def boundary_distances(self) -> np.ndarray:
        """Vector of distance_to_boundary over all edges."""
        m = self.midpoints
        return np.minimum(m.min(axis=1), (self.L - m).min(axis=1))

    def set_distance(self, e: int, S, include_boundary: bool = False) -> float:
        """Distance from e to the edge set S, optionally min'd with the boundary.

        Returns +inf for an empty S with the boundary flag off.
        """
        S = np.asarray(S, dtype=np.int64)
        best = np.inf
        if S.size:
            diffs = self.midpoints[S] - self.midpoints[e]
            best = float(np.sqrt((diffs * diffs).sum(axis=1)).min())
        if include_boundary:
            best = min(best, self.distance_to_boundary(e))
        return best

    def meets_boundary(self, e: int) -> bool:
        """True when some endpoint of e lies on a face of the box."""
        for v in self.edges[e]:
            c = self.vertices[v]
            if (c == 0).any() or (c == self.L).any():
                return True
        return False


def build_box(d: int, L: int, max_vertices: int = 5_000_000) -> BoxLattice:
    """Construct the box lattice for dimension d and side length L.

    Raises ConfigurationError for d < 2, L < 1 or a vertex count above
    ``max_vertices`` (memory guard).
    """
    if d < 2:
        raise ConfigurationError(f"dimension must be >= 2, got {d}")
    if L < 1:
        raise ConfigurationError(f"side length must be >= 1, got {L}")
    n_v = (L + 1) ** d
    if n_v > max_vertices:
        raise ConfigurationError(
            f"(L+1)^d = {n_v} exceeds the memory budget of {max_vertices} vertices"
        )

    vertices = np.array(list(itertools.product(range(L + 1), repeat=d)), dtype=np.int64)
    edges = []
    axes = []
    radix = np.array([(L + 1) ** (d - 1 - i) for i in range(d)], dtype=np.int64)
    for vi, x in enumerate(vertices):
        for a in range(d):
            if x[a] < L:
                edges.append((vi, vi + radix[a]))
                axes.append(a)
    edges_arr = np.array(edges, dtype=np.int64)
    axes_arr = np.array(axes, dtype=np.int64)
    midpoints = (vertices[edges_arr[:, 0]] + vertices[edges_arr[:, 1]]) / 2.0

    last = vertices[:, d - 1]
    top = np.nonzero(last == L)[0].astype(np.int64)
    bottom = np.nonzero(last == 0)[0].astype(np.int64)

    lookup = {(int(u), int(v)): k for k, (u, v) in enumerate(edges_arr)}
    return BoxLattice(
        d=d,
        L=L,
        vertices=vertices,
        edges=edges_arr,
        edge_axis=axes_arr,
        midpoints=midpoints,
        top=top,
        bottom=bottom,
        _edge_lookup=lookup,
    )

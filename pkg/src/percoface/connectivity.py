"""Cluster structure of a configuration and separating-set utilities.

A configuration assigns open/closed to every edge of the box.  The functions
here answer reachability questions for a snapshot: per-vertex cluster labels,
the top-bottom disconnection event, the hole-filled open cluster of a face,
its in-box external boundary, and extraction of inclusion-minimal separating
sets.  Everything is pure; the incremental structure used by the running
chain lives in ``dynamics``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ContractViolation
from .lattice import BoxLattice


@dataclass
class Config:
    """Edge configuration over a lattice: ``bits[e]`` is True when e is open."""

    lattice: BoxLattice
    bits: np.ndarray

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=bool)
        if self.bits.shape != (self.lattice.n_edges,):
            raise ContractViolation(
                f"configuration has {self.bits.shape} bits for "
                f"{self.lattice.n_edges} edges"
            )

    def copy(self) -> "Config":
        return Config(self.lattice, self.bits.copy())


@dataclass
class ClusterLabels:
    """Open-cluster labels per vertex.

    The label of a vertex is the smallest vertex index in its cluster, which
    makes the labelling deterministic.  ``t_labels`` / ``b_labels`` collect
    the labels appearing on the top / bottom face; the configuration is
    disconnected exactly when they are disjoint.
    """

    labels: np.ndarray
    t_labels: frozenset
    b_labels: frozenset
    generation: int = 0

    def in_face_cluster(self, side: str) -> np.ndarray:
        """Boolean vertex mask of O(T) or O(B)."""
        labs = self.t_labels if side == "T" else self.b_labels
        if not labs:
            return np.zeros_like(self.labels, dtype=bool)
        return np.isin(self.labels, np.fromiter(labs, dtype=np.int64))

    @property
    def disconnected(self) -> bool:
        return self.t_labels.isdisjoint(self.b_labels)


def label_clusters(config: Config, generation: int = 0) -> ClusterLabels:
    """Label the open clusters of a configuration.

    Plain union-find over the open edges with the smallest vertex index as the
    cluster representative.
    """
    lat = config.lattice
    parent = np.arange(lat.n_vertices, dtype=np.int64)

    def find(v: int) -> int:
        root = v
        while parent[root] != root:
            root = parent[root]
        while parent[v] != root:
            parent[v], v = root, parent[v]
        return root

    for k in np.nonzero(config.bits)[0]:
        u, v = config.lattice.edges[k]
        ru, rv = find(u), find(v)
        if ru != rv:
            # Keep the smaller index as the root so labels are canonical.
            if ru < rv:
                parent[rv] = ru
            else:
                parent[ru] = rv

    roots = np.array([find(v) for v in range(lat.n_vertices)], dtype=np.int64)
    return ClusterLabels(
        labels=roots,
        t_labels=frozenset(int(r) for r in roots[lat.top]),
        b_labels=frozenset(int(r) for r in roots[lat.bottom]),
        generation=generation,
    )


def disconnected(config: Config) -> bool:
    """True when no open path joins the top face to the bottom face."""
    return label_clusters(config).disconnected


def filled_cluster(config: Config, side: str) -> np.ndarray:
    """Hole-filled open cluster of a face, as a boolean vertex mask.

    Returns O'(side): the open cluster of the face together with every
    star-connected component of its complement that does not reach outside
    the box.  The outside is represented by a one-cell shell around the box,
    which is star-connected, so a complement component is a hole exactly when
    it misses the shell.
    """
    lat = config.lattice
    if side not in ("T", "B"):
        raise ContractViolation(f"side must be 'T' or 'B', got {side!r}")
    mask = label_clusters(config).in_face_cluster(side)

    shape = (lat.L + 3,) * lat.d
    grid = np.zeros(shape, dtype=bool)
    idx = tuple(lat.vertices[:, i] + 1 for i in range(lat.d))
    grid[idx] = mask

    comp, _ = ndimage.label(~grid, structure=np.ones((3,) * lat.d, dtype=int))
    outside = comp[(0,) * lat.d]  # a shell cell, always in the complement
    hole = (comp != 0) & (comp != outside)
    return mask | hole[idx]


def external_boundary_in_box(lattice: BoxLattice, vertex_mask: np.ndarray) -> np.ndarray:
    """Edges of the lattice with exactly one endpoint in the vertex set."""
    vertex_mask = np.asarray(vertex_mask, dtype=bool)
    u, v = lattice.edges[:, 0], lattice.edges[:, 1]
    return np.nonzero(vertex_mask[u] ^ vertex_mask[v])[0].astype(np.int64)


def separates(lattice: BoxLattice, S) -> bool:
    """True when removing the edge set S from the full box cuts top from bottom.

    The test is configuration-independent: paths may use every lattice edge
    outside S.
    """
    S = np.asarray(S, dtype=np.int64)
    blocked = np.zeros(lattice.n_edges, dtype=bool)
    blocked[S] = True
    remaining = Config(lattice, ~blocked)
    return disconnected(remaining)


def minimal_cut_from(lattice: BoxLattice, S) -> np.ndarray:
    """Prune a separating set to an inclusion-minimal cut.

    Greedy removal in ascending edge order: drop an edge whenever the rest
    still separates.  Deterministic; raises ContractViolation when S does not
    separate in the first place.
    """
    S = sorted(int(e) for e in np.asarray(S, dtype=np.int64))
    if not separates(lattice, S):
        raise ContractViolation("minimal_cut_from requires a separating set")
    keep = set(S)
    for e in S:
        trial = keep - {e}
        if separates(lattice, sorted(trial)):
            keep = trial
    return np.array(sorted(keep), dtype=np.int64)

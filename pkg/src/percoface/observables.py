"""Derived edge sets and distances of a coupled snapshot.

Edge sets are sorted int64 arrays of edge indices.  The pivotal set is read
off one labelling pass (an edge is pivotal when its endpoints sit in the two
face clusters); the boundary sets S+ / S- come from the hole-filled face
clusters.  The trial-opening definition of pivotality lives in ``oracle`` and
is kept strictly separate as the cross-check.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.spatial.distance import cdist

from .connectivity import (
    Config,
    external_boundary_in_box,
    filled_cluster,
    label_clusters,
)
from .dynamics import CoupledState
from .errors import ContractViolation


def interface_of_bits(x_bits: np.ndarray, y_bits: np.ndarray) -> np.ndarray:
    """Edges open in X and closed in Y (the symmetric difference under domination)."""
    return np.nonzero(x_bits & ~y_bits)[0].astype(np.int64)


def interface(state: CoupledState) -> np.ndarray:
    return interface_of_bits(state.X, state.Y)


def pivotal(config: Config) -> np.ndarray:
    """Closed edges whose opening would join the faces, from one labelling pass."""
    labels = label_clusters(config)
    if not labels.disconnected:
        raise ContractViolation("pivotal set is defined on disconnected configurations")
    lat = config.lattice
    in_t = labels.in_face_cluster("T")
    in_b = labels.in_face_cluster("B")
    u, v = lat.edges[:, 0], lat.edges[:, 1]
    mask = (in_t[u] & in_b[v]) | (in_b[u] & in_t[v])
    return np.nonzero(mask)[0].astype(np.int64)


def _boundary_set(config: Config, side: str) -> np.ndarray:
    if not disconnected_guard(config):
        raise ContractViolation("S+/S- are defined on disconnected configurations")
    return external_boundary_in_box(config.lattice, filled_cluster(config, side))


def disconnected_guard(config: Config) -> bool:
    return label_clusters(config).disconnected


def s_plus(config: Config) -> np.ndarray:
    """In-box external boundary of the hole-filled top cluster."""
    return _boundary_set(config, "T")


def s_minus(config: Config) -> np.ndarray:
    """In-box external boundary of the hole-filled bottom cluster."""
    return _boundary_set(config, "B")


def pivotal_via_sets(config: Config) -> np.ndarray:
    """The pivotal set computed as the intersection of S+ and S- (cross-check path)."""
    return np.intersect1d(s_plus(config), s_minus(config))


def isolation_radius(config: Config, e: int, piv: np.ndarray = None) -> float:
    """Distance from e to the other pivotal edges and the box complement."""
    if piv is None:
        piv = pivotal(config)
    others = piv[piv != e]
    return config.lattice.set_distance(e, others, include_boundary=True)


def _trim(lattice, edge_set: np.ndarray, ell: float) -> np.ndarray:
    """Drop the edges whose midpoint is within ell of the box complement."""
    edge_set = np.asarray(edge_set, dtype=np.int64)
    if ell <= 0 or edge_set.size == 0:
        return edge_set
    keep = lattice.boundary_distances()[edge_set] >= ell
    return edge_set[keep]


def _directed_max(lattice, from_set: np.ndarray, to_set: np.ndarray) -> float:
    """max over the first set of the distance to the second; 0 on empty source."""
    if from_set.size == 0:
        return 0.0
    if to_set.size == 0:
        return math.inf
    dm = cdist(lattice.midpoints[from_set], lattice.midpoints[to_set])
    return float(dm.min(axis=1).max())


def hausdorff_semi(lattice, A, B, ell: float) -> float:
    """The boundary-trimmed Hausdorff semi-distance between two edge sets.

    Edges within ell of the box complement are ignored on both sides.  When
    both trimmed sets are empty the constraints are vacuous and the value is
    0; when one trimmed set is nonempty and the opposite set is empty no
    radius works and the value is +inf.  Not a distance: the triangle
    inequality fails, so no code may rely on it.
    """
    if ell < 0:
        raise ContractViolation(f"ell must be >= 0, got {ell}")
    A = np.asarray(A, dtype=np.int64)
    B = np.asarray(B, dtype=np.int64)
    a_trim = _trim(lattice, A, ell)
    b_trim = _trim(lattice, B, ell)
    return max(_directed_max(lattice, a_trim, B), _directed_max(lattice, b_trim, A))


def hausdorff_union_boundary(lattice, A, B) -> float:
    """Classical Hausdorff distance between A and B, each unioned with the complement.

    The complement contributes distance 0 to itself, so each direction is the
    max over one set of the distance to the other set min'd with the distance
    to the boundary.  Used to property-test the comparison inequality against
    ``hausdorff_semi``.
    """
    A = np.asarray(A, dtype=np.int64)
    B = np.asarray(B, dtype=np.int64)
    bd = lattice.boundary_distances()

    def directed(P, Q):
        if P.size == 0:
            return 0.0
        to_boundary = bd[P]
        if Q.size == 0:
            return float(to_boundary.max())
        dm = cdist(lattice.midpoints[P], lattice.midpoints[Q]).min(axis=1)
        return float(np.minimum(dm, to_boundary).max())

    return max(directed(A, B), directed(B, A))

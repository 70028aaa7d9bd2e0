"""Per-resource displacement actions and exact move validity.

A player holding M resources distributed as counts d over N nodes moves every
resource each step.  Resource j sitting on node n_j picks a displacement
a_j in {0..N-1} and lands on node (n_j + a_j) mod N.  Resources are numbered
in ascending node order, so d = (3,0,1,2) puts resources 0..2 on node 0,
resource 3 on node 2 and resources 4..5 on node 3.

Validity of a full action vector reduces to M independent row lookups in the
action-displacement matrix J, where J[j][k] = H[n_j][(n_j + k) mod N].  J
factors as lift(d) @ augment(H): the lift stacks one-hot origin rows and the
augmented adjacency pre-applies the cyclic displacement re-indexing.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import CapExceededError, InvalidActionError
from .graphs import Graph

# Enumeration and flat-index machinery refuse to materialize anything larger.
DEFAULT_ACTION_CAP = 10 ** 6
# Flat indices must stay addressable as int64 with headroom.
_INDEX_LIMIT = 2 ** 62


def augment(graph: Graph) -> np.ndarray:
    """Displacement-augmented adjacency: row i is H row i left-rotated by i.

    augment(H)[i][k] == H[i][(i + k) mod N], so column k answers "may a
    resource on node i displace by k".
    """
    h = graph.adjacency
    out = np.empty_like(h)
    for i in range(graph.n):
        out[i] = np.roll(h[i], -i)
    return out


def resource_origins(counts: np.ndarray) -> np.ndarray:
    """Node of each resource id under the ascending-node numbering."""
    counts = np.asarray(counts)
    if (counts < 0).any():
        raise InvalidActionError("negative resource count")
    return np.repeat(np.arange(counts.shape[0]), counts)


def lift(counts: np.ndarray, n: int | None = None) -> np.ndarray:
    """Stack one-hot origin rows, one per resource: an M x N 0/1 matrix."""
    counts = np.asarray(counts)
    if n is None:
        n = counts.shape[0]
    origins = resource_origins(counts)
    out = np.zeros((origins.shape[0], n), dtype=np.uint8)
    out[np.arange(origins.shape[0]), origins] = 1
    return out


@dataclass(frozen=True)
class ActionMatrix:
    """Valid-displacement table for one player's current distribution.

    rows[j][k] == 1 iff resource j may take displacement k.  Rows beyond the
    real resources (padding for the smaller side of an unequal match) admit
    only displacement 0.
    """

    rows: np.ndarray      # (m_total, n) uint8
    origins: np.ndarray   # (m_real,) node of each real resource
    m_real: int           # real resources; rows 0..m_total-m_real-1 are virtual

    @property
    def m_total(self) -> int:
        return self.rows.shape[0]

    @property
    def n(self) -> int:
        return self.rows.shape[1]

    @property
    def n_virtual(self) -> int:
        return self.m_total - self.m_real


def action_matrix(graph: Graph, counts: np.ndarray) -> ActionMatrix:
    """Build J for distribution counts on graph: J = lift(counts) @ augment(H)."""
    counts = np.asarray(counts)
    if counts.shape != (graph.n,):
        raise InvalidActionError(f"counts shape {counts.shape} does not match {graph.n} nodes")
    lifted = lift(counts, graph.n)
    rows = (lifted @ augment(graph)).astype(np.uint8)
    origins = resource_origins(counts)
    rows.setflags(write=False)
    origins.setflags(write=False)
    return ActionMatrix(rows=rows, origins=origins, m_real=rows.shape[0])


def pad_virtual(j_mat: ActionMatrix, m_total: int) -> ActionMatrix:
    """Prefix virtual resources so both sides act with the same vector length.

    Virtual rows allow only displacement 0; they carry no mass and never move.
    """
    if m_total < j_mat.m_real:
        raise InvalidActionError(f"cannot pad {j_mat.m_real} resources down to {m_total}")
    extra = m_total - j_mat.m_real
    if extra == 0:
        return j_mat
    virt = np.zeros((extra, j_mat.n), dtype=np.uint8)
    virt[:, 0] = 1
    rows = np.vstack([virt, j_mat.rows])
    rows.setflags(write=False)
    return ActionMatrix(rows=rows, origins=j_mat.origins, m_real=j_mat.m_real)


def valid_displacements(j_mat: ActionMatrix, j: int) -> np.ndarray:
    """Ascending displacements available to resource j."""
    return np.flatnonzero(j_mat.rows[j])


def is_valid_action(j_mat: ActionMatrix, action: np.ndarray) -> bool:
    """M row lookups; no enumeration."""
    action = np.asarray(action)
    if action.shape != (j_mat.m_total,):
        return False
    if (action < 0).any() or (action >= j_mat.n).any():
        return False
    return bool(j_mat.rows[np.arange(j_mat.m_total), action].all())


def count_valid_actions(j_mat: ActionMatrix) -> int:
    return int(np.prod([int(r.sum()) for r in j_mat.rows], dtype=object))


def enumerate_valid_actions(j_mat: ActionMatrix, cap: int = DEFAULT_ACTION_CAP) -> np.ndarray:
    """All valid vectors in lexicographic order, resource 0 most significant."""
    total = count_valid_actions(j_mat)
    if total > cap:
        raise CapExceededError(f"{total} valid actions exceeds cap {cap}")
    per_row = [valid_displacements(j_mat, j) for j in range(j_mat.m_total)]
    out = np.array(list(product(*per_row)), dtype=np.int64)
    return out.reshape(total, j_mat.m_total)


def flat_valid_mask(j_mat: ActionMatrix, cap: int = DEFAULT_ACTION_CAP) -> np.ndarray:
    """Boolean mask over all n**m_total flat indices, True at valid vectors."""
    n, m = j_mat.n, j_mat.m_total
    if n ** m > cap:
        raise CapExceededError(f"{n}**{m} flat actions exceeds cap {cap}")
    mask = np.ones(1, dtype=bool)
    for j in range(m):
        row = j_mat.rows[j].astype(bool)
        mask = (mask[:, None] & row[None, :]).reshape(-1)
    return mask


def action_index(action: np.ndarray, n: int) -> int:
    """Base-n positional encoding, resource 0 most significant."""
    action = np.asarray(action)
    m = action.shape[0]
    if n ** m > _INDEX_LIMIT:
        raise CapExceededError(f"{n}**{m} exceeds flat index range")
    idx = 0
    for a in action:
        idx = idx * n + int(a)
    return idx


def action_from_index(idx: int, n: int, m: int) -> np.ndarray:
    if n ** m > _INDEX_LIMIT:
        raise CapExceededError(f"{n}**{m} exceeds flat index range")
    if not 0 <= idx < n ** m:
        raise InvalidActionError(f"index {idx} out of range for {n}**{m} actions")
    out = np.empty(m, dtype=np.int64)
    for j in range(m - 1, -1, -1):
        out[j] = idx % n
        idx //= n
    return out


def apply_action(counts: np.ndarray, action: np.ndarray, graph: Graph,
                 j_mat: ActionMatrix | None = None) -> np.ndarray:
    """Move every resource by its displacement; raises on an invalid vector.

    Implemented through the matrix route: each lifted one-hot row is cyclically
    rotated by its displacement and the rows are summed.
    """
    counts = np.asarray(counts)
    if j_mat is None:
        j_mat = action_matrix(graph, counts)
    action = np.asarray(action)
    if not is_valid_action(j_mat, action):
        raise InvalidActionError(f"action {action.tolist()} invalid for distribution {counts.tolist()}")
    new = np.zeros(graph.n, dtype=counts.dtype)
    lifted = lift(counts, graph.n)
    for j in range(lifted.shape[0]):
        new += np.roll(lifted[j], int(action[j]))
    return new


def apply_padded_action(counts: np.ndarray, action: np.ndarray, graph: Graph,
                        j_mat: ActionMatrix) -> np.ndarray:
    """Apply a padded action vector; virtual coordinates must be 0 and move nothing."""
    action = np.asarray(action)
    if not is_valid_action(j_mat, action):
        raise InvalidActionError(
            f"padded action {action.tolist()} invalid for distribution {np.asarray(counts).tolist()}")
    real = action[j_mat.n_virtual:]
    real_mat = ActionMatrix(rows=j_mat.rows[j_mat.n_virtual:], origins=j_mat.origins,
                            m_real=j_mat.m_real)
    return apply_action(counts, real, graph, j_mat=real_mat)

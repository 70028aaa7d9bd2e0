"""Directed game boards: 0/1 adjacency matrices with per-node self-loop semantics.

A graph on N nodes is stored as an N x N matrix H where H[i][j] = 1 means a
resource may move from node i to node j in one step.  H[i][i] = 1 grants
permission to stay put; without it any resource on node i must leave.
Node ids are 0-based.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import GraphFormatError


@dataclass(frozen=True)
class Graph:
    """Immutable adjacency wrapper. Every row must have at least one outgoing edge."""

    adjacency: np.ndarray
    name: str = ""

    def __post_init__(self):
        h = np.asarray(self.adjacency)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise GraphFormatError(f"adjacency must be square, got shape {h.shape}")
        if h.shape[0] < 1:
            raise GraphFormatError("graph needs at least one node")
        if not np.isin(h, (0, 1)).all():
            raise GraphFormatError("adjacency entries must be 0 or 1")
        if (h.sum(axis=1) == 0).any():
            dead = int(np.flatnonzero(h.sum(axis=1) == 0)[0])
            raise GraphFormatError(f"node {dead} has no outgoing edge; every resource must have a move")
        h = h.astype(np.uint8)
        h.setflags(write=False)
        object.__setattr__(self, "adjacency", h)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    def content_hash(self) -> str:
        """Hash of the adjacency content only; independent of the display name."""
        return hashlib.sha256(format_graph(self).encode()).hexdigest()[:16]

    def __eq__(self, other):
        return isinstance(other, Graph) and np.array_equal(self.adjacency, other.adjacency)

    def __hash__(self):
        return hash(self.adjacency.tobytes())


def format_graph(graph: Graph) -> str:
    """Canonical text form: first line N, then N rows of space-separated 0/1."""
    lines = [str(graph.n)]
    for row in graph.adjacency:
        lines.append(" ".join(str(int(v)) for v in row))
    return "\n".join(lines) + "\n"


def parse_graph(text: str, name: str = "") -> Graph:
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not lines:
        raise GraphFormatError("empty graph file")
    try:
        n = int(lines[0])
    except ValueError:
        raise GraphFormatError(f"first line must be the node count, got {lines[0]!r}") from None
    if len(lines) != n + 1:
        raise GraphFormatError(f"expected {n} adjacency rows, found {len(lines) - 1}")
    rows = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != n:
            raise GraphFormatError(f"row {len(rows)} has {len(parts)} entries, expected {n}")
        try:
            rows.append([int(p) for p in parts])
        except ValueError:
            raise GraphFormatError(f"non-integer entry in row {len(rows)}") from None
    return Graph(np.array(rows, dtype=np.uint8), name=name)


def save_graph(path, graph: Graph) -> None:
    with open(path, "w") as fh:
        fh.write(format_graph(graph))


def load_graph(path) -> Graph:
    try:
        with open(path) as fh:
            return parse_graph(fh.read(), name=str(path))
    except OSError as exc:
        raise GraphFormatError(f"cannot read graph file {path}: {exc}") from None


def _builtin_text(name: str) -> str:
    ref = resources.files("graphblotto").joinpath(f"data/graphs/{name}.txt")
    return ref.read_text()


# Boards shipped with the package. ring{n} are directed cycles with self-loops;
# demo4 is the 4-node worked example; g0..g4 are the 5-node experiment boards.
BUILTIN_GRAPHS = (
    "ring3", "ring4", "ring5",
    "demo4",
    "g0", "g1", "g2", "g3", "g4",
)


def named_graph(name: str) -> Graph:
    """Load one of the boards shipped with the package."""
    key = name.lower()
    if key not in BUILTIN_GRAPHS:
        raise GraphFormatError(f"unknown graph {name!r}; built-ins: {', '.join(BUILTIN_GRAPHS)}")
    return parse_graph(_builtin_text(key), name=key)


def resolve_graph(spec: str) -> Graph:
    """Accept a built-in name or a path to a graph spec file."""
    if spec.lower() in BUILTIN_GRAPHS:
        return named_graph(spec)
    return load_graph(spec)

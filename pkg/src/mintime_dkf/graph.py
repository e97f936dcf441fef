"""Undirected sensor-network topology and its spectral quantities."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import NoEdges, ParseError, ValidationError


@dataclass(frozen=True)
class Graph:
    """Undirected weighted graph on nodes ``0..n-1``.

    Edges are stored as sorted pairs ``(i, j)`` with ``i < j``, so the two
    orientations of an undirected link are represented identically.
    """

    n: int
    edges: tuple[tuple[int, int], ...] = ()
    weights: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError(f"graph needs at least one node, got n={self.n}")
        canon = []
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValidationError(f"self-loop at node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValidationError(f"edge ({i}, {j}) out of range for n={self.n}")
            canon.append((min(i, j), max(i, j)))
        if len(set(canon)) != len(canon):
            raise ValidationError("duplicate edge")
        weights = tuple(float(w) for w in self.weights) or (1.0,) * len(canon)
        if len(weights) != len(canon):
            raise ValidationError("one weight per edge required")
        if any(not w > 0 for w in weights):
            raise ValidationError("edge weights must be positive")
        order = sorted(range(len(canon)), key=canon.__getitem__)
        object.__setattr__(self, "edges", tuple(canon[k] for k in order))
        object.__setattr__(self, "weights", tuple(weights[k] for k in order))

    def neighbors(self, i: int) -> list[int]:
        return [b if a == i else a for a, b in self.edges if i in (a, b)]


def derive_matrices(g: Graph) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(adjacency, degree, laplacian)`` as dense ``n x n`` arrays.

    The arrays are cached per graph and read-only; copy before modifying.
    """
    return _matrices(g)


@lru_cache(maxsize=64)
def _matrices(g: Graph) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    adj = np.zeros((g.n, g.n))
    for (i, j), w in zip(g.edges, g.weights):
        adj[i, j] = adj[j, i] = w
    deg = np.diag(adj.sum(axis=1))
    out = (adj, deg, deg - adj)
    for a in out:
        a.flags.writeable = False
    return out


def _components(g: Graph) -> np.ndarray:
    adj, _, _ = derive_matrices(g)
    _, labels = connected_components(csr_matrix(adj), directed=False)
    return labels


def is_connected(g: Graph) -> bool:
    return bool(np.all(_components(g) == 0))


def random_connected_graph(n: int, edge_probability: float, seed: int) -> Graph:
    """Erdos-Renyi sample, repaired into a connected graph.

    If the sample is disconnected, uniformly random edges are added between
    distinct components until a single component remains. The result depends
    only on ``(n, edge_probability, seed)``.
    """
    if n < 1:
        raise ValidationError("n must be positive")
    if not 0 < edge_probability <= 1:
        raise ValidationError("edge_probability must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < edge_probability
    edges = [(int(i), int(j)) for i, j in zip(iu[keep], ju[keep])]
    g = Graph(n, tuple(edges))
    labels = _components(g)
    while labels.max() > 0:
        i, j = rng.integers(n, size=2)
        if labels[i] != labels[j]:
            edges.append((int(i), int(j)))
            g = Graph(n, tuple(edges))
            labels = _components(g)
    return g


def max_step_size(g: Graph) -> float:
    """Upper bound ``1 / max_i L[i, i]`` on the consensus step size."""
    _, deg, _ = derive_matrices(g)
    dmax = deg.max()
    if dmax <= 0:
        raise NoEdges("step-size bound undefined on a graph without edges")
    return 1.0 / dmax


def stable_step_size(g: Graph) -> float:
    """Largest step for which the band-pass and low-pass filters are
    Gershgorin-stable, ``min(1/dmax, 2/(3*dmax + 1))``.

    ``max_step_size`` alone does not keep ``I - eps*(L + D + I)`` inside the
    unit disk; this tighter bound does. Returns ``1.0`` for edgeless graphs.
    """
    _, deg, _ = derive_matrices(g)
    dmax = deg.max()
    if dmax <= 0:
        return 1.0
    return min(1.0 / dmax, 2.0 / (3.0 * dmax + 1.0))


def default_step_size(g: Graph) -> float:
    return 0.9 * stable_step_size(g)


def parse_edge_list(text: str, n: int) -> Graph:
    """Parse ``"i j [weight]"`` lines (``#`` comments and blank lines allowed)."""
    edges, weights = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) not in (2, 3):
            raise ParseError(f"edge list line {lineno}: expected 'i j [weight]'")
        try:
            edges.append((int(parts[0]), int(parts[1])))
            weights.append(float(parts[2]) if len(parts) == 3 else 1.0)
        except ValueError as exc:
            raise ParseError(f"edge list line {lineno}: {exc}") from None
    return Graph(n, tuple(edges), tuple(weights))


def format_edge_list(g: Graph) -> str:
    if all(w == 1.0 for w in g.weights):
        return "".join(f"{i} {j}\n" for i, j in g.edges)
    return "".join(f"{i} {j} {w!r}\n" for (i, j), w in zip(g.edges, g.weights))

"""Per-component 2-D layout by stress majorization.

Target distances come from similarity (short edges between similar
messages); stability across ticks comes from warm starts only. There are
no anchor terms: the objective is identical with or without a warm start.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from streammap import kernels
from streammap.semantics import SimilarityGraph

MIN_EDGE_LENGTH = 0.05
DEFAULT_MAX_ITER = 200
DEFAULT_RTOL = 1e-4
# Absolute stress floor per node pair. With w = d^-2 the stress of the
# all-coincident configuration is exactly the pair count, so this is a
# scale-free "done" threshold for exactly realizable instances.
ATOL_PER_PAIR = 1e-12
JITTER = 0.01


@dataclass(frozen=True)
class ComponentLayout:
    """2-D positions for one connected component."""

    component_id: str
    positions: dict[str, tuple[float, float]]
    stress: float
    history: tuple[float, ...] = ()

    def translated(self, dx: float, dy: float) -> "ComponentLayout":
        moved = {n: (x + dx, y + dy) for n, (x, y) in self.positions.items()}
        return ComponentLayout(self.component_id, moved, self.stress, self.history)


def edge_length(similarity: float) -> float:
    """Target length for a similarity edge, floored away from zero."""
    return max(1.0 - similarity, MIN_EDGE_LENGTH)


def target_distances(graph: SimilarityGraph) -> tuple[list[str], np.ndarray]:
    """All-pairs target distances for a connected subgraph.

    Adjacent pairs get edge_length(s); the rest get weighted shortest-path
    distance over those lengths. Returns (sorted node ids, dense matrix).
    """
    ids = sorted(graph.nodes)
    index = {n: i for i, n in enumerate(ids)}
    n = len(ids)
    if n <= 1:
        return ids, np.zeros((n, n))
    rows, cols, vals = [], [], []
    for u, v, s in graph.edges:
        i, j = index[u], index[v]
        lij = edge_length(s)
        rows += [i, j]
        cols += [j, i]
        vals += [lij, lij]
    adj = csr_matrix((vals, (rows, cols)), shape=(n, n))
    dist = dijkstra(adj, directed=False)
    if not np.isfinite(dist).all():
        raise ValueError("subgraph is not connected; lay out components separately")
    return ids, dist


def distance_map(ids: list[str], dist: np.ndarray) -> dict[str, dict[str, float]]:
    """Dense distance matrix as a symmetric nested map keyed by node id."""
    return {
        u: {v: float(dist[i, j]) for j, v in enumerate(ids) if j != i}
        for i, u in enumerate(ids)
    }


def stress(
    positions: Mapping[str, tuple[float, float]],
    distances: Mapping[str, Mapping[str, float]],
) -> float:
    """Weighted stress with w_ij = d_ij^-2 over a symmetric distance map."""
    total = 0.0
    for u in sorted(positions):
        xu, yu = positions[u]
        for v in sorted(distances[u]):
            if v <= u or v not in positions:
                continue
            d = distances[u][v]
            xv, yv = positions[v]
            e = float(np.hypot(xu - xv, yu - yv))
            total += (e - d) ** 2 / (d * d)
    return total


def component_seed(base_seed: int, component_id: str) -> int:
    return (base_seed * 0x9E3779B1 + zlib.crc32(component_id.encode("utf-8"))) % (2**32)


def layout_component(
    graph: SimilarityGraph,
    component_id: str,
    distances: tuple[list[str], np.ndarray] | None = None,
    warm_start: Mapping[str, tuple[float, float]] | None = None,
    seed: int = 0,
    max_iter: int = DEFAULT_MAX_ITER,
    rtol: float = DEFAULT_RTOL,
) -> ComponentLayout:
    """Stress-majorization layout of one connected component.

    `distances` is the (ids, matrix) pair from target_distances, computed
    here when not supplied. Warm-started nodes keep their previous
    positions as initialization only. New nodes start at the centroid of
    already-initialized graph neighbors plus a seeded jitter of magnitude
    0.01, or at a seeded random position in the unit disc when no
    neighbor is initialized yet. A singleton component sits at its warm
    position, or (0, 0) cold.
    """
    ids, dist = distances if distances is not None else target_distances(graph)
    n = len(ids)
    warm = dict(warm_start or {})
    if n == 0:
        return ComponentLayout(component_id, {}, 0.0, (0.0,))
    if n == 1:
        pos = warm.get(ids[0], (0.0, 0.0))
        return ComponentLayout(component_id, {ids[0]: (float(pos[0]), float(pos[1]))}, 0.0, (0.0,))
    if not np.isfinite(dist).all():
        raise ValueError("non-finite target distance")

    rng = np.random.default_rng(component_seed(seed, component_id))
    init: dict[str, tuple[float, float]] = {}
    for node in ids:
        if node in warm:
            init[node] = (float(warm[node][0]), float(warm[node][1]))
    for node in ids:
        if node in init:
            continue
        ready = [init[nbr] for nbr in sorted(graph.neighbors(node)) if nbr in init]
        if ready:
            cx = sum(p[0] for p in ready) / len(ready)
            cy = sum(p[1] for p in ready) / len(ready)
            angle = rng.uniform(0.0, 2.0 * np.pi)
            init[node] = (cx + JITTER * np.cos(angle), cy + JITTER * np.sin(angle))
        else:
            radius = np.sqrt(rng.uniform())
            angle = rng.uniform(0.0, 2.0 * np.pi)
            init[node] = (radius * np.cos(angle), radius * np.sin(angle))

    x0 = np.array([init[node] for node in ids], dtype=np.float64)
    w = np.zeros_like(dist)
    off = ~np.eye(n, dtype=bool)
    w[off] = dist[off] ** -2.0
    # Moore-Penrose inverse of the weight Laplacian via the rank-fix identity.
    v = np.diag(w.sum(axis=1)) - w
    jn = np.full((n, n), 1.0 / n)
    vplus = np.linalg.inv(v + jn) - jn
    atol = ATOL_PER_PAIR * n * (n - 1) / 2
    x, hist = kernels.smacof(dist, w, vplus, x0, max_iter, rtol, atol)
    positions = {node: (float(x[i, 0]), float(x[i, 1])) for i, node in enumerate(ids)}
    return ComponentLayout(component_id, positions, float(hist[-1]), tuple(float(h) for h in hist))

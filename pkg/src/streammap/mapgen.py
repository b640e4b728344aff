"""Country polygons, stable colors, and frame composition.

Countries are unions of Voronoi cells of member nodes; a deterministic
lattice of filler points bounds the outer cells so every country is a
finite polygon. Filler cells belong to no country.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Mapping, Sequence

import numpy as np
import shapely
from scipy.spatial import QhullError, Voronoi, cKDTree
from shapely.geometry import MultiPoint, Polygon
from shapely.ops import unary_union

from streammap.clustering import Cluster
from streammap.layout import ComponentLayout
from streammap.messages import Message
from streammap.packing import PackingState
from streammap.semantics import SimilarityGraph

Ring = tuple[tuple[float, float], ...]


def load_palette(path: str | None = None) -> tuple[str, ...]:
    """Load the fixed country palette (one #RRGGBB per line, '//' comments)."""
    if path is None:
        text = resources.files("streammap.data").joinpath("palette.txt").read_text("utf-8")
    else:
        with open(path, "r", encoding="utf-8") as fp:
            text = fp.read()
    colors = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("//"):
            continue
        if len(line) != 7 or not line.startswith("#"):
            raise ValueError(f"bad palette entry: {line!r}")
        colors.append(line.lower())
    return tuple(colors)


DEFAULT_PALETTE = load_palette()


@dataclass(frozen=True)
class Country:
    """One subtopic rendered as a map region."""

    cluster_id: str
    color: str
    label: tuple[str, ...]
    rings: tuple[Ring, ...]

    def with_color(self, color: str) -> "Country":
        return Country(self.cluster_id, color, self.label, self.rings)


@dataclass(frozen=True)
class FrameNode:
    id: str
    x: float
    y: float
    cluster_id: str
    text: str
    ts: int


@dataclass(frozen=True)
class FrameMetrics:
    stress: float = 0.0
    node_disp: float = 0.0
    pack_disp: float = 0.0
    utilization: float = 0.0


@dataclass(frozen=True)
class MapFrame:
    """The published artifact: one complete map tick."""

    seq: int
    ts: int
    countries: tuple[Country, ...]
    nodes: tuple[FrameNode, ...]
    edges: tuple[tuple[str, str, float], ...]
    metrics: FrameMetrics


def map_positions(
    layouts: Iterable[ComponentLayout],
    state: PackingState,
) -> dict[str, tuple[float, float]]:
    """Final map coordinates: layout positions translated by the component's
    grid offset times the cell size."""
    out: dict[str, tuple[float, float]] = {}
    cs = state.cell_size
    for lay in layouts:
        off = state.placements[lay.component_id]
        dx, dy = off[0] * cs, off[1] * cs
        for node, (x, y) in lay.positions.items():
            out[node] = (x + dx, y + dy)
    return out


def _median_nn_distance(points: np.ndarray) -> float:
    if len(points) < 2:
        return 0.0
    tree = cKDTree(points)
    dists, _ = tree.query(points, k=2)
    return float(np.median(dists[:, 1]))


def _lattice_points(
    lo: np.ndarray, hi: np.ndarray, pitch: float
) -> np.ndarray:
    xs = np.arange(lo[0] - 2 * pitch, hi[0] + 2 * pitch + pitch * 0.5, pitch)
    ys = np.arange(lo[1] - 2 * pitch, hi[1] + 2 * pitch + pitch * 0.5, pitch)
    gx, gy = np.meshgrid(xs, ys)
    return np.stack([gx.ravel(), gy.ravel()], axis=1)


def _fallback_square(x: float, y: float, side: float) -> Ring:
    h = side / 2.0
    ring = (
        (round(x - h, 6), round(y - h, 6)),
        (round(x + h, 6), round(y - h, 6)),
        (round(x + h, 6), round(y + h, 6)),
        (round(x - h, 6), round(y + h, 6)),
        (round(x - h, 6), round(y - h, 6)),
    )
    return ring


def _polygon_rings(geom) -> tuple[Ring, ...]:
    """Rings of a Polygon/MultiPolygon: each part's exterior first, then its
    holes; parts ordered by descending area for a deterministic outer-first
    listing. Vertices rounded to 1e-6."""
    if geom.is_empty:
        return ()
    parts = [geom] if isinstance(geom, Polygon) else sorted(
        geom.geoms, key=lambda g: -g.area
    )
    rings: list[Ring] = []
    for part in parts:
        for seq in [part.exterior, *part.interiors]:
            coords = tuple((round(px, 6), round(py, 6)) for px, py in seq.coords)
            rings.append(coords)
    return tuple(rings)


def generate_countries(
    positions: Mapping[str, tuple[float, float]],
    clusters: Sequence[Cluster],
) -> list[Country]:
    """Uncolored countries: per cluster, the union of its member nodes'
    Voronoi cells in the filler-augmented diagram.

    Degenerate inputs (all nodes coincident, or a Voronoi failure) fall
    back to a deterministic pitch-sized square per country.
    """
    node_ids = sorted(positions)
    if not node_ids:
        return []
    pts = np.array([positions[n] for n in node_ids], dtype=np.float64)
    uniq, inverse = np.unique(pts, axis=0, return_inverse=True)
    pitch = 2.0 * _median_nn_distance(uniq)
    if pitch <= 0.0:
        pitch = 1.0

    cells: list[Polygon | None] = [None] * len(uniq)
    if len(uniq) >= 1:
        lattice = _lattice_points(uniq.min(axis=0), uniq.max(axis=0), pitch)
        if len(lattice):
            tree = cKDTree(uniq)
            d, _ = tree.query(lattice, k=1)
            lattice = lattice[d > 1e-9]
        try:
            vor = Voronoi(np.vstack([uniq, lattice]))
            for i in range(len(uniq)):
                region = vor.regions[vor.point_region[i]]
                if -1 in region or not region:
                    continue
                verts = vor.vertices[region]
                # cells are convex and contain their site: angular order
                # around the site gives the ring deterministically
                angles = np.arctan2(verts[:, 1] - uniq[i, 1], verts[:, 0] - uniq[i, 0])
                poly = Polygon(verts[np.argsort(angles, kind="stable")])
                if poly.is_valid and not poly.is_empty:
                    cells[i] = poly
        except QhullError:
            pass

    countries: list[Country] = []
    node_index = {n: i for i, n in enumerate(node_ids)}
    for cluster in sorted(clusters, key=lambda c: c.id):
        polys = []
        squares: list[Ring] = []
        for member in sorted(cluster.members):
            i = inverse[node_index[member]]
            cell = cells[i]
            if cell is not None:
                polys.append(cell)
            else:
                x, y = positions[member]
                squares.append(_fallback_square(x, y, pitch))
        rings: tuple[Ring, ...] = ()
        if polys:
            rings = _polygon_rings(unary_union(polys))
        rings = rings + tuple(dict.fromkeys(squares))
        countries.append(Country(cluster.id, "", cluster.label, rings))
    return countries


def color_hash(cluster_id: str) -> int:
    return zlib.crc32(cluster_id.encode("utf-8"))


def assign_colors(
    countries: Sequence[Country],
    prev_colors: Mapping[str, str],
    last_used: Mapping[str, int],
    tick: int,
    palette: Sequence[str] = DEFAULT_PALETTE,
) -> tuple[list[Country], dict[str, int]]:
    """Color countries stably.

    Surviving cluster ids keep their previous color. New clusters (in id
    order) take the least-recently-used palette color not currently
    displayed; when all palette colors are displayed, the color is picked
    by a stable hash of the cluster id. Returns the colored countries and
    the updated color-recency map.
    """
    recency = dict(last_used)
    in_use: set[str] = set()
    colored: dict[str, str] = {}
    for country in countries:
        color = prev_colors.get(country.cluster_id)
        if color is not None:
            colored[country.cluster_id] = color
            in_use.add(color)
    for country in sorted(countries, key=lambda c: c.cluster_id):
        if country.cluster_id in colored:
            continue
        free = [c for c in palette if c not in in_use]
        if free:
            color = min(free, key=lambda c: (recency.get(c, -1), palette.index(c)))
        else:
            color = palette[color_hash(country.cluster_id) % len(palette)]
        colored[country.cluster_id] = color
        in_use.add(color)
    for color in colored.values():
        recency[color] = tick
    return [c.with_color(colored[c.cluster_id]) for c in countries], recency


class FrameCompositionError(ValueError):
    """Cross-references between frame parts are inconsistent."""


def compose_frame(
    seq: int,
    ts: int,
    countries: Sequence[Country],
    layouts: Sequence[ComponentLayout],
    state: PackingState,
    node_clusters: Mapping[str, str],
    messages: Mapping[str, Message],
    graph: SimilarityGraph,
    metrics: FrameMetrics,
) -> MapFrame:
    """Assemble and validate the publishable frame.

    Node coordinates are the component layout positions translated by the
    component's grid offset times the cell size. Raises
    FrameCompositionError when cross-references do not line up.
    """
    positions = map_positions(layouts, state)
    country_ids = {c.cluster_id for c in countries}
    nodes = []
    for node_id in sorted(positions):
        cluster_id = node_clusters.get(node_id)
        if cluster_id is None:
            raise FrameCompositionError(f"node {node_id} has no cluster")
        if cluster_id not in country_ids:
            raise FrameCompositionError(f"cluster {cluster_id} has no country")
        msg = messages.get(node_id)
        if msg is None:
            raise FrameCompositionError(f"node {node_id} has no message")
        x, y = positions[node_id]
        nodes.append(FrameNode(node_id, x, y, cluster_id, msg.text, msg.ts))
    present = set(positions)
    for u, v, _ in graph.edges:
        if u not in present or v not in present:
            raise FrameCompositionError(f"edge ({u}, {v}) references a missing node")
    return MapFrame(
        seq=seq,
        ts=ts,
        countries=tuple(countries),
        nodes=tuple(nodes),
        edges=tuple(graph.edges),
        metrics=metrics,
    )

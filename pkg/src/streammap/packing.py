"""Stable packing of disconnected components on a shared integer grid.

Each component's footprint is rasterized into a polyomino mask; masks are
placed without overlap, each as close as possible to where it sat last
tick. A previously placed component whose old offset is still free does
not move at all. A periodic refresh repacks everything compactly around
the origin, trading one discontinuity for area utilization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import shapely

from streammap import kernels
from streammap.layout import ComponentLayout

Cell = tuple[int, int]  # (col, row)


@dataclass(frozen=True)
class PolyominoMask:
    """Grid rasterization of one component's footprint.

    `cells` are (col, row) pairs relative to the mask origin; `origin` is
    the absolute grid cell the mask was rasterized at, so the anchor (the
    layout-space corner of relative cell (0, 0)) is origin * cell_size.
    """

    cell_size: float
    cells: frozenset[Cell]
    origin: Cell = (0, 0)

    @property
    def anchor(self) -> tuple[float, float]:
        return (self.origin[0] * self.cell_size, self.origin[1] * self.cell_size)

    @property
    def cell_count(self) -> int:
        return len(self.cells)

    def absolute_cells(self, offset: Cell = (0, 0)) -> frozenset[Cell]:
        """Mask cells on the shared grid when translated by `offset`."""
        dc = self.origin[0] + offset[0]
        dr = self.origin[1] + offset[1]
        return frozenset((c + dc, r + dr) for c, r in self.cells)

    def absolute_array(self) -> np.ndarray:
        """Untranslated absolute cells as an int64 (k, 2) array, sorted."""
        cells = sorted(self.absolute_cells())
        if not cells:
            return np.zeros((0, 2), dtype=np.int64)
        return np.asarray(cells, dtype=np.int64)

    def bbox_center(self) -> tuple[float, float]:
        """Center of the untranslated absolute bounding box, in cells."""
        arr = self.absolute_array()
        if arr.size == 0:
            return (float(self.origin[0]), float(self.origin[1]))
        lo = arr.min(axis=0)
        hi = arr.max(axis=0) + 1
        return (float(lo[0] + hi[0]) / 2.0, float(lo[1] + hi[1]) / 2.0)


def rasterize(layout: ComponentLayout, cell_size: float, margin: float) -> PolyominoMask:
    """Mask of all grid cells intersecting the margin-dilated convex hull
    of the component's node positions.

    A single node yields the cells covered by a margin-radius disc, and
    every node's own cell is always included, so non-empty components give
    non-empty masks even at margin 0.
    """
    if cell_size <= 0:
        raise ValueError("cell_size must be positive")
    if margin < 0:
        raise ValueError("margin must be non-negative")
    pts = list(layout.positions.values())
    if not pts:
        return PolyominoMask(cell_size=cell_size, cells=frozenset())
    node_cells = {
        (math.floor(x / cell_size), math.floor(y / cell_size)) for x, y in pts
    }
    hull = shapely.MultiPoint(pts).convex_hull
    geom = hull.buffer(margin, quad_segs=16) if margin > 0 else hull
    cells = set(node_cells)
    if not geom.is_empty:
        minx, miny, maxx, maxy = geom.bounds
        c0, c1 = math.floor(minx / cell_size), math.floor(maxx / cell_size)
        r0, r1 = math.floor(miny / cell_size), math.floor(maxy / cell_size)
        cols, rows = np.meshgrid(np.arange(c0, c1 + 1), np.arange(r0, r1 + 1))
        cols = cols.ravel()
        rows = rows.ravel()
        boxes = shapely.box(
            cols * cell_size, rows * cell_size,
            (cols + 1) * cell_size, (rows + 1) * cell_size,
        )
        hit = shapely.intersects(boxes, geom)
        cells.update(zip(cols[hit].tolist(), rows[hit].tolist()))
    origin = (min(c for c, _ in cells), min(r for _, r in cells))
    rel = frozenset((c - origin[0], r - origin[1]) for c, r in cells)
    return PolyominoMask(cell_size=cell_size, cells=rel, origin=origin)


@dataclass(frozen=True)
class PackingState:
    """Grid placements carried across ticks."""

    placements: dict[str, Cell]
    masks: dict[str, PolyominoMask]
    cell_size: float
    ticks_since_refresh: int = 0

    @classmethod
    def empty(cls, cell_size: float = 1.0) -> "PackingState":
        return cls(placements={}, masks={}, cell_size=cell_size)

    @cached_property
    def occupied(self) -> frozenset[Cell]:
        out: set[Cell] = set()
        for comp_id, offset in self.placements.items():
            out |= self.masks[comp_id].absolute_cells(offset)
        return frozenset(out)


# Candidate offsets around a desired point, grouped by squared distance and
# ordered (d^2 asc, col asc, row asc). Grown on demand, cached module-wide.
_ring_limit = 0
_rings: list[np.ndarray] = []


def _extend_rings(r2_needed: int) -> None:
    global _ring_limit, _rings
    if _ring_limit * _ring_limit >= r2_needed and _rings:
        return
    limit = max(4, _ring_limit * 2, math.isqrt(r2_needed) + 1)
    span = np.arange(-limit, limit + 1, dtype=np.int64)
    dc, dr = np.meshgrid(span, span)
    dc = dc.ravel()
    dr = dr.ravel()
    d2 = dc * dc + dr * dr
    keep = d2 <= limit * limit  # only full rings are valid
    order = np.lexsort((dr[keep], dc[keep], d2[keep]))
    deltas = np.stack([dc[keep][order], dr[keep][order]], axis=1)
    bounds = np.flatnonzero(np.diff(d2[keep][order])) + 1
    _rings = [g for g in np.split(deltas, bounds)]
    _ring_limit = limit


def _ring(index: int) -> np.ndarray:
    while index >= len(_rings):
        _extend_rings((_ring_limit + 8) ** 2)
    return _rings[index]


class _Grid:
    """Growable occupancy raster over absolute grid cells."""

    def __init__(self):
        self.arr = np.zeros((0, 0), dtype=np.uint8)
        self.org_col = 0
        self.org_row = 0

    def fill(self, cells: np.ndarray) -> None:
        if cells.size == 0:
            return
        lo = cells.min(axis=0)
        hi = cells.max(axis=0)
        self._ensure(lo[0], hi[0], lo[1], hi[1])
        self.arr[cells[:, 1] - self.org_row, cells[:, 0] - self.org_col] = 1

    def _ensure(self, cmin: int, cmax: int, rmin: int, rmax: int) -> None:
        h, w = self.arr.shape
        pad_left = max(0, self.org_col - cmin)
        pad_right = max(0, cmax - (self.org_col + w - 1)) if w else cmax - cmin + 1
        pad_top = max(0, self.org_row - rmin)
        pad_bot = max(0, rmax - (self.org_row + h - 1)) if h else rmax - rmin + 1
        if w == 0:
            self.arr = np.zeros((rmax - rmin + 1, cmax - cmin + 1), dtype=np.uint8)
            self.org_col, self.org_row = cmin, rmin
            return
        if pad_left or pad_right or pad_top or pad_bot:
            self.arr = np.pad(self.arr, ((pad_top, pad_bot), (pad_left, pad_right)))
            self.org_col -= pad_left
            self.org_row -= pad_top


def _scan_place(grid: _Grid, mask_cells: np.ndarray, desired: Cell) -> Cell:
    """First collision-free offset in (d^2, col, row) order around `desired`.

    The grid is unbounded, so a free offset always exists; empty masks
    place directly at the desired offset.
    """
    if mask_cells.size == 0:
        return desired
    base = np.asarray(desired, dtype=np.int64)
    index = 0
    while True:
        cands = _ring(index) + base
        hit = kernels.first_free(grid.arr, grid.org_col, grid.org_row, mask_cells, cands)
        if hit >= 0:
            return (int(cands[hit, 0]), int(cands[hit, 1]))
        index += 1


def _round_point(x: float, y: float) -> Cell:
    return (math.floor(x + 0.5), math.floor(y + 0.5))


def pack(
    masks: Sequence[tuple[str, PolyominoMask]],
    previous: PackingState,
) -> PackingState:
    """Place all masks, preferring each component's previous offset.

    Previously placed components go first, larger previous masks earlier
    (ties by id), each scanning outward from its previous offset. New
    components follow, larger first, scanning outward from the centroid of
    everything already placed (origin when nothing is). Deterministic.
    """
    ids = [comp_id for comp_id, _ in masks]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate component id")
    by_id = dict(masks)
    cell_size = previous.cell_size
    for _, mask in masks:
        cell_size = mask.cell_size
        break

    old = [cid for cid in ids if cid in previous.placements]
    new = [cid for cid in ids if cid not in previous.placements]
    old.sort(key=lambda cid: (-previous.masks[cid].cell_count, cid))
    new.sort(key=lambda cid: (-by_id[cid].cell_count, cid))

    grid = _Grid()
    placements: dict[str, Cell] = {}
    placed_cells_sum = np.zeros(2, dtype=np.float64)
    placed_cells_n = 0
    for cid in old + new:
        mask = by_id[cid]
        cells = mask.absolute_array()
        if cid in previous.placements:
            desired = previous.placements[cid]
        elif placed_cells_n:
            centroid = placed_cells_sum / placed_cells_n
            center = mask.bbox_center()
            desired = _round_point(centroid[0] - center[0], centroid[1] - center[1])
        else:
            center = mask.bbox_center()
            desired = _round_point(-center[0], -center[1])
        offset = _scan_place(grid, cells, desired)
        placements[cid] = offset
        if cells.size:
            placed = cells + np.asarray(offset, dtype=np.int64)
            grid.fill(placed)
            placed_cells_sum += placed.sum(axis=0) + 0.5 * len(placed)
            placed_cells_n += len(placed)
    return PackingState(
        placements=placements,
        masks=dict(masks),
        cell_size=cell_size,
        ticks_since_refresh=previous.ticks_since_refresh + 1,
    )


def refresh_pack(
    masks: Sequence[tuple[str, PolyominoMask]],
    cell_size: float | None = None,
) -> PackingState:
    """Pack from scratch, compactly around the origin, ignoring history.

    Components are placed by cell count descending (ties by id), each
    scanning outward from the origin. Resets the refresh counter.
    """
    ids = [comp_id for comp_id, _ in masks]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate component id")
    if cell_size is None:
        cell_size = masks[0][1].cell_size if masks else 1.0
    order = sorted(masks, key=lambda im: (-im[1].cell_count, im[0]))
    grid = _Grid()
    placements: dict[str, Cell] = {}
    for cid, mask in order:
        cells = mask.absolute_array()
        center = mask.bbox_center()
        desired = _round_point(-center[0], -center[1])
        offset = _scan_place(grid, cells, desired)
        placements[cid] = offset
        if cells.size:
            grid.fill(cells + np.asarray(offset, dtype=np.int64))
    return PackingState(
        placements=placements,
        masks=dict(masks),
        cell_size=cell_size,
        ticks_since_refresh=0,
    )


def utilization(state: PackingState) -> float:
    """Occupied cells over the bounding-box area of the occupied cells."""
    occ = state.occupied
    if not occ:
        return 0.0
    cols = [c for c, _ in occ]
    rows = [r for _, r in occ]
    area = (max(cols) - min(cols) + 1) * (max(rows) - min(rows) + 1)
    return len(occ) / area


def packing_displacement(prev: PackingState, cur: PackingState) -> float:
    """Mean Euclidean offset change (in cells) over shared component ids."""
    shared = set(prev.placements) & set(cur.placements)
    if not shared:
        return 0.0
    total = 0.0
    for cid in shared:
        pc, pr = prev.placements[cid]
        cc, cr = cur.placements[cid]
        total += math.hypot(cc - pc, cr - pr)
    return total / len(shared)

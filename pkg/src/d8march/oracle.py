"""
Brute-force reference: area-proportional flood fill and raster boundaries.

Nothing here looks at MNS labels, so it can check the marcher independently.
The flood fill doubles as the conventional baseline whose cost grows with
watershed area.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .grid import D8_OFFSETS, NEIGHBOR_ORDER, CellIndex, D8Grid, GridError, LatticePoint
from .march import BoundaryPolygon, ReadCounter

Edge = tuple[LatticePoint, LatticePoint]


@dataclass(frozen=True, eq=False)
class CellSet:
    mask: np.ndarray  # bool, (nrows, ncols)
    cardinality: int

    def __contains__(self, c) -> bool:
        x, y = c
        nrows, ncols = self.mask.shape
        return 0 <= x < ncols and 0 <= y < nrows and bool(self.mask[y, x])

    def cells(self) -> list[CellIndex]:
        ys, xs = np.nonzero(self.mask)
        return [CellIndex(x, y) for x, y in zip(xs.tolist(), ys.tolist())]


def _edge(p, q) -> Edge:
    p, q = LatticePoint(*p), LatticePoint(*q)
    return (p, q) if p <= q else (q, p)


def flood_fill_watershed(g: D8Grid, v_star) -> tuple[CellSet, ReadCounter]:
    """All cells draining through ``v_star``, by breadth-first search upstream.

    Every dequeued cell inspects its 8 neighbors; ``face_reads`` records that
    cost (8 per visited cell).
    """
    x0, y0 = v_star
    if not g.is_valid(v_star):
        raise GridError(f"pour point ({x0},{y0}) is nodata or off-grid")
    ncols, nrows = g.ncols, g.nrows
    codes = g.codes.ravel().tolist()
    nodata = g.nodata_code
    seen = bytearray(ncols * nrows)
    seen[y0 * ncols + x0] = 1
    counter = ReadCounter()
    queue = deque([(x0, y0)])
    count = 0
    while queue:
        x, y = queue.popleft()
        count += 1
        counter.face_reads += 8
        for _, dx, dy in NEIGHBOR_ORDER:
            nx, ny = x + dx, y + dy
            if not (0 <= nx < ncols and 0 <= ny < nrows):
                continue
            i = ny * ncols + nx
            if seen[i]:
                continue
            code = codes[i]
            if code == nodata:
                continue
            ox, oy = D8_OFFSETS[code]
            if nx + ox == x and ny + oy == y:
                seen[i] = 1
                queue.append((nx, ny))
    mask = np.frombuffer(bytes(seen), dtype=np.uint8).reshape(g.shape).astype(bool)
    counter.accepted_moves = count
    return CellSet(mask, count), counter


def cellset_boundary(s: CellSet) -> frozenset[Edge]:
    """Lattice edges with exactly one adjacent face in ``s``."""
    if s.cardinality == 0:
        raise ValueError("empty cell set has no boundary")
    edges = set()
    for x, y in s.cells():
        if (x, y - 1) not in s:
            edges.add(_edge((x, y), (x + 1, y)))
        if (x + 1, y) not in s:
            edges.add(_edge((x + 1, y), (x + 1, y + 1)))
        if (x, y + 1) not in s:
            edges.add(_edge((x, y + 1), (x + 1, y + 1)))
        if (x - 1, y) not in s:
            edges.add(_edge((x, y), (x, y + 1)))
    return frozenset(edges)


def polygon_to_edges(p: BoundaryPolygon) -> frozenset[Edge]:
    edges = set()
    for a, b in p.edges():
        if abs(a[0] - b[0]) + abs(a[1] - b[1]) != 1:
            raise ValueError(f"non-unit step {tuple(a)} -> {tuple(b)}")
        e = _edge(a, b)
        if e in edges:
            raise ValueError(f"non-simple walk: edge {e} traversed twice")
        edges.add(e)
    return frozenset(edges)


def left_face(a, b) -> CellIndex:
    """Cell on the left when walking the unit lattice edge a -> b."""
    dx, dy = b[0] - a[0], b[1] - a[1]
    x, y = a
    if (dx, dy) == (0, -1):
        return CellIndex(x - 1, y - 1)
    if (dx, dy) == (1, 0):
        return CellIndex(x, y - 1)
    if (dx, dy) == (0, 1):
        return CellIndex(x, y)
    if (dx, dy) == (-1, 0):
        return CellIndex(x - 1, y)
    raise ValueError(f"non-unit step {tuple(a)} -> {tuple(b)}")


def equivalent(p: BoundaryPolygon, s: CellSet) -> bool:
    """Polygon traces exactly the boundary of ``s`` with ``s`` on its left."""
    try:
        edges = polygon_to_edges(p)
    except ValueError:
        return False
    if edges != cellset_boundary(s):
        return False
    return all(left_face(a, b) in s for a, b in p.edges())


def vertex_degrees(edges) -> dict[LatticePoint, int]:
    deg: dict[LatticePoint, int] = {}
    for a, b in edges:
        deg[a] = deg.get(a, 0) + 1
        deg[b] = deg.get(b, 0) + 1
    return deg

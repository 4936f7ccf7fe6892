"""
Modified nested set (MNS) labels for D8 grids.

Every valid cell gets a discovery time ``d`` (unique, 1..n_valid) from a
depth-first walk of the inflow forest and a finish time ``f``, the largest
discovery time inside its upstream subtree.  Cell ``u`` drains through ``v``
exactly when ``d(v) <= d(u) <= f(v)``, so ``f(v) - d(v) + 1`` is the
watershed area of ``v`` in cells.  Label 0 marks nodata.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property
from typing import BinaryIO, Optional

import numpy as np

from .grid import (
    D8_OFFSETS,
    NEIGHBOR_ORDER,
    CellIndex,
    CycleError,
    D8Grid,
    GridError,
    downstream_index,
    validate_acyclic,
)

MAGIC = b"MNS1"
_HEADER = struct.Struct("<4sIIddd")
_RECORD_DTYPE = np.dtype("<u8")

# Rank of a child, relative to its parent, in N, NE, ..., NW order, keyed by
# the child's own code.  A cell coded E (1) sits west of its parent (rank 6).
_CHILD_RANK = {
    code: [(-dx, -dy) for _, dx, dy in NEIGHBOR_ORDER].index((dx, dy))
    for code, (dx, dy) in D8_OFFSETS.items()
}


class MnsFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class MnsGrid:
    ncols: int
    nrows: int
    xllcorner: float
    yllcorner: float
    cellsize: float
    d: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        for name in ("d", "f"):
            arr = np.array(getattr(self, name), dtype=np.uint64, copy=True)
            if arr.shape != (self.nrows, self.ncols):
                raise ValueError(f"{name} table has shape {arr.shape}")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.nrows, self.ncols

    @property
    def n_valid(self) -> int:
        return int(np.count_nonzero(self.d))

    @cached_property
    def d_rows(self) -> list[list[int]]:
        # python ints for the scalar-heavy marching loop
        return self.d.tolist()

    @cached_property
    def f_rows(self) -> list[list[int]]:
        return self.f.tolist()

    def in_range(self, x: int, y: int) -> bool:
        return 0 <= x < self.ncols and 0 <= y < self.nrows

    def is_valid(self, c) -> bool:
        x, y = c
        return self.in_range(x, y) and self.d_rows[y][x] != 0

    def interval(self, c) -> tuple[int, int]:
        x, y = c
        return self.d_rows[y][x], self.f_rows[y][x]

    def area(self, c) -> int:
        d, f = self.interval(c)
        if d == 0:
            raise GridError(f"cell ({c[0]},{c[1]}) is nodata")
        return f - d + 1

    def equals(self, other: "MnsGrid") -> bool:
        return (
            self.ncols == other.ncols
            and self.nrows == other.nrows
            and self.xllcorner == other.xllcorner
            and self.yllcorner == other.yllcorner
            and self.cellsize == other.cellsize
            and np.array_equal(self.d, other.d)
            and np.array_equal(self.f, other.f)
        )


@dataclass(frozen=True)
class TraversalStats:
    pushes: int
    pops: int
    cells_labeled: int


def compute_mns(g: D8Grid) -> tuple[MnsGrid, TraversalStats]:
    """Label ``g`` with discovery/finish times.

    Roots are visited in row-major order under a virtual super-root; children
    are visited in N, NE, E, SE, S, SW, W, NW order.  The walk uses an explicit
    stack, so flow paths of any length are fine.
    """
    down = downstream_index(g)
    n = down.size
    valid = down != -2
    n_valid = int(valid.sum())
    if n_valid == 0:
        raise GridError("empty flow grid")

    # children grouped by parent, ordered by rank (CSR layout)
    internal = np.flatnonzero(down >= 0)
    codes = g.codes.ravel()
    rank_table = np.zeros(256, dtype=np.int64)
    for code, rank in _CHILD_RANK.items():
        rank_table[code] = rank
    ranks = rank_table[codes[internal]]
    order = np.lexsort((ranks, down[internal]))
    children = internal[order].tolist()
    counts = np.bincount(down[internal], minlength=n)
    starts = np.concatenate(([0], np.cumsum(counts))).tolist()
    roots = np.flatnonzero(down == -1)
    parent = down.tolist()

    d = [0] * n
    preorder = []
    stack = roots[::-1].tolist()
    pushes = len(stack)
    pops = 0
    counter = 0
    while stack:
        v = stack.pop()
        pops += 1
        counter += 1
        d[v] = counter
        preorder.append(v)
        lo, hi = starts[v], starts[v + 1]
        if hi > lo:
            # reversed so the first child in N..NW order is popped first
            stack.extend(children[hi - 1:lo - 1 if lo else None:-1])
            pushes += hi - lo

    if counter != n_valid:
        # unreached cells sit on or drain into a cycle
        validate_acyclic(g)
        raise CycleError([])  # pragma: no cover - validate_acyclic raises first

    size = [1] * n
    for v in reversed(preorder):
        p = parent[v]
        if p >= 0:
            size[p] += size[v]
    f = [0] * n
    for v in preorder:
        f[v] = d[v] + size[v] - 1

    m = MnsGrid(
        g.ncols,
        g.nrows,
        g.xllcorner,
        g.yllcorner,
        g.cellsize,
        np.asarray(d, dtype=np.uint64).reshape(g.shape),
        np.asarray(f, dtype=np.uint64).reshape(g.shape),
    )
    return m, TraversalStats(pushes=pushes, pops=pops, cells_labeled=counter)


def subtree_contains(m: MnsGrid, v_star, u: Optional[CellIndex]) -> bool:
    """True when ``u`` drains through ``v_star`` (interval test)."""
    if u is None:
        return False
    ux, uy = u
    if not m.in_range(ux, uy):
        return False
    du = m.d_rows[uy][ux]
    if du == 0:
        return False
    lo, hi = m.interval(v_star)
    return lo <= du <= hi


def parent_cell(m: MnsGrid, c) -> Optional[CellIndex]:
    """Downstream neighbor of ``c`` recovered from labels alone.

    Ancestors of ``c`` are ordered by discovery time along the flow path, so
    the parent is the neighboring ancestor with the largest ``d``.  Returns
    None for roots.
    """
    x, y = c
    dc = m.d_rows[y][x]
    best = None
    best_d = 0
    for _, dx, dy in NEIGHBOR_ORDER:
        nx, ny = x + dx, y + dy
        if not m.in_range(nx, ny):
            continue
        dn = m.d_rows[ny][nx]
        if dn and dn < dc <= m.f_rows[ny][nx] and dn > best_d:
            best, best_d = CellIndex(nx, ny), dn
    return best


def to_d8(m: MnsGrid, nodata_code: int = -9999) -> D8Grid:
    """Rebuild a flow grid from labels.

    Internal cells are exact.  A root's original exit direction is not stored,
    so roots get the first direction (ESRI code order) leaving the grid or
    entering nodata.
    """
    codes = np.full(m.shape, nodata_code, dtype=np.int64)
    for y in range(m.nrows):
        for x in range(m.ncols):
            if m.d_rows[y][x] == 0:
                continue
            p = parent_cell(m, (x, y))
            if p is not None:
                codes[y, x] = _code_towards((x, y), p)
                continue
            for code, (dx, dy) in sorted(D8_OFFSETS.items()):
                nx, ny = x + dx, y + dy
                if not m.in_range(nx, ny) or m.d_rows[ny][nx] == 0:
                    codes[y, x] = code
                    break
            else:
                raise MnsFormatError(f"root ({x},{y}) has no exit off-grid or into nodata")
    return D8Grid(m.ncols, m.nrows, m.xllcorner, m.yllcorner, m.cellsize, nodata_code, codes)


def _code_towards(c, target) -> int:
    dx, dy = target[0] - c[0], target[1] - c[1]
    for code, off in D8_OFFSETS.items():
        if off == (dx, dy):
            return code
    raise ValueError(f"{target} is not a neighbor of {c}")


# ---------------------------------------------------------------------------
# binary format
# ---------------------------------------------------------------------------


def write_mns(m: MnsGrid, sink: BinaryIO) -> None:
    sink.write(_HEADER.pack(MAGIC, m.ncols, m.nrows, m.xllcorner, m.yllcorner, m.cellsize))
    records = np.empty((m.nrows, m.ncols, 2), dtype=_RECORD_DTYPE)
    records[..., 0] = m.d
    records[..., 1] = m.f
    sink.write(records.tobytes())


def read_mns(source: BinaryIO) -> MnsGrid:
    head = source.read(_HEADER.size)
    if len(head) < _HEADER.size:
        raise MnsFormatError("truncated header")
    magic, ncols, nrows, xll, yll, cellsize = _HEADER.unpack(head)
    if magic != MAGIC:
        raise MnsFormatError(f"bad magic {magic!r}")
    if ncols == 0 or nrows == 0:
        raise MnsFormatError("empty grid dimensions")
    expected = ncols * nrows * 2 * _RECORD_DTYPE.itemsize
    body = source.read(expected)
    if len(body) < expected:
        raise MnsFormatError(f"truncated body: {len(body)} of {expected} bytes")
    records = np.frombuffer(body, dtype=_RECORD_DTYPE).reshape(nrows, ncols, 2)
    d, f = records[..., 0], records[..., 1]
    n_valid = int(np.count_nonzero(d))
    if int(d.max()) > n_valid or int(f.max()) > n_valid:
        raise MnsFormatError(f"label exceeds n_valid={n_valid}")
    if np.any((d == 0) != (f == 0)):
        raise MnsFormatError("nodata sentinel set in only one of d/f")
    return MnsGrid(ncols, nrows, xll, yll, cellsize, d, f)


def save_mns(m: MnsGrid, path) -> None:
    with open(path, "wb") as fh:
        write_mns(m, fh)


def load_mns(path) -> MnsGrid:
    with open(path, "rb") as fh:
        return read_mns(fh)


def mns_file_size(ncols: int, nrows: int) -> int:
    """Bytes used by the binary format: fixed header plus 16 per cell."""
    return _HEADER.size + 16 * ncols * nrows

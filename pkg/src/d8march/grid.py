"""
D8 flow-direction rasters and the dual corner lattice.

Axis convention used throughout the package: ``x`` grows east (column),
``y`` grows south (row), row 0 is the northernmost row.  Lattice point
``(x, y)`` is the north-west corner of cell ``(x, y)``.

D8 codes follow the ESRI convention::

    32  64  128
    16   .    1
     8   4    2
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, TextIO, Union

import numpy as np

# code -> (dx, dy)
D8_OFFSETS = {
    1: (1, 0),
    2: (1, 1),
    4: (0, 1),
    8: (-1, 1),
    16: (-1, 0),
    32: (-1, -1),
    64: (0, -1),
    128: (1, -1),
}
LEGAL_CODES = frozenset(D8_OFFSETS)

# Neighbor enumeration order used for inflows, traversal and tie-breaks.
# (name, dx, dy)
NEIGHBOR_ORDER = (
    ("N", 0, -1),
    ("NE", 1, -1),
    ("E", 1, 0),
    ("SE", 1, 1),
    ("S", 0, 1),
    ("SW", -1, 1),
    ("W", -1, 0),
    ("NW", -1, -1),
)
OFFSET_TO_CODE = {off: code for code, off in D8_OFFSETS.items()}
# D8 codes listed in NEIGHBOR_ORDER
ORDERED_CODES = tuple(OFFSET_TO_CODE[(dx, dy)] for _, dx, dy in NEIGHBOR_ORDER)


class CellIndex(NamedTuple):
    x: int
    y: int


class LatticePoint(NamedTuple):
    x: int
    y: int


class Direction(enum.IntEnum):
    """Cardinal march heading; arithmetic is modulo 4."""

    N = 0
    E = 1
    S = 2
    W = 3

    @property
    def opposite(self) -> "Direction":
        return Direction((self + 2) % 4)

    def turn(self, steps: int) -> "Direction":
        """Rotate by ``steps`` quarter turns (positive is clockwise on the map)."""
        return Direction((self + steps) % 4)


class CellClass(enum.Enum):
    ROOT = "root"
    INTERNAL = "internal"
    NODATA = "nodata"


class Outlet(enum.Enum):
    """Terminal results of :func:`downstream`."""

    OFF_GRID = "off-grid"
    INTO_NODATA = "into-nodata"


OFF_GRID = Outlet.OFF_GRID
INTO_NODATA = Outlet.INTO_NODATA


class GridError(ValueError):
    pass


class GridParseError(GridError):
    def __init__(self, message: str, line: int, column: Optional[int] = None):
        self.line = line
        self.column = column
        where = f"line {line}" if column is None else f"line {line}, column {column}"
        super().__init__(f"{where}: {message}")


class CycleError(GridError):
    """Raised when flow directions contain a directed cycle."""

    def __init__(self, cells: list[CellIndex]):
        self.cells = list(cells)
        shown = " -> ".join(f"({c.x},{c.y})" for c in self.cells[:12])
        more = " ..." if len(self.cells) > 12 else ""
        super().__init__(f"flow cycle of length {len(self.cells)}: {shown}{more}")


@dataclass(frozen=True, eq=False)
class D8Grid:
    """Immutable D8 flow-direction raster.

    ``codes`` has shape ``(nrows, ncols)`` and is indexed ``codes[y, x]``.
    """

    ncols: int
    nrows: int
    xllcorner: float
    yllcorner: float
    cellsize: float
    nodata_code: int
    codes: np.ndarray

    def __post_init__(self):
        if self.ncols < 1 or self.nrows < 1:
            raise GridError("grid needs ncols >= 1 and nrows >= 1")
        if not self.cellsize > 0:
            raise GridError("cellsize must be positive")
        if self.nodata_code in LEGAL_CODES:
            raise GridError(f"nodata code {self.nodata_code} collides with a D8 code")
        codes = np.array(self.codes, dtype=np.int64, copy=True)
        if codes.shape != (self.nrows, self.ncols):
            raise GridError(
                f"codes shape {codes.shape} does not match {self.nrows}x{self.ncols}"
            )
        legal = np.isin(codes, list(LEGAL_CODES)) | (codes == self.nodata_code)
        if not legal.all():
            y, x = np.argwhere(~legal)[0]
            raise GridError(f"illegal D8 code {codes[y, x]} at ({x},{y})")
        codes.flags.writeable = False
        object.__setattr__(self, "codes", codes)

    @classmethod
    def from_codes(cls, codes, nodata_code: int = -9999, xllcorner: float = 0.0,
                   yllcorner: float = 0.0, cellsize: float = 1.0) -> "D8Grid":
        arr = np.asarray(codes)
        if arr.ndim != 2:
            raise GridError("codes must be a 2-D table")
        nrows, ncols = arr.shape
        return cls(ncols, nrows, xllcorner, yllcorner, cellsize, nodata_code, arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.nrows, self.ncols

    @property
    def valid_mask(self) -> np.ndarray:
        return self.codes != self.nodata_code

    @property
    def n_valid(self) -> int:
        return int(self.valid_mask.sum())

    def in_range(self, x: int, y: int) -> bool:
        return 0 <= x < self.ncols and 0 <= y < self.nrows

    def is_valid(self, c) -> bool:
        x, y = c
        return self.in_range(x, y) and int(self.codes[y, x]) != self.nodata_code

    def code(self, c) -> int:
        x, y = c
        return int(self.codes[y, x])

    def cells(self) -> Iterable[CellIndex]:
        """Valid cells in row-major order."""
        ys, xs = np.nonzero(self.valid_mask)
        for x, y in zip(xs.tolist(), ys.tolist()):
            yield CellIndex(x, y)

    def same_as(self, other: "D8Grid") -> bool:
        return (
            self.ncols == other.ncols
            and self.nrows == other.nrows
            and self.xllcorner == other.xllcorner
            and self.yllcorner == other.yllcorner
            and self.cellsize == other.cellsize
            and self.nodata_code == other.nodata_code
            and np.array_equal(self.codes, other.codes)
        )


# ---------------------------------------------------------------------------
# ESRI ASCII grid I/O
# ---------------------------------------------------------------------------

_HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value")


def parse_ascii_grid(text: Union[str, TextIO]) -> D8Grid:
    """Parse an ESRI ASCII grid holding D8 codes.

    Errors carry 1-based line and column numbers of the offending token.
    """
    if not isinstance(text, str):
        text = text.read()
    lines = text.splitlines()
    if len(lines) < 6:
        raise GridParseError("truncated header (need 6 lines)", len(lines) + 1)

    header: dict[str, str] = {}
    for lineno in range(1, 7):
        parts = lines[lineno - 1].split()
        if len(parts) != 2:
            raise GridParseError("header line must be 'key value'", lineno)
        key = parts[0].lower()
        if key not in _HEADER_KEYS:
            raise GridParseError(f"unknown header key {parts[0]!r}", lineno, 1)
        if key in header:
            raise GridParseError(f"duplicate header key {parts[0]!r}", lineno, 1)
        header[key] = parts[1]

    def header_value(key, conv):
        lineno = next(i + 1 for i in range(6) if lines[i].split()[0].lower() == key)
        try:
            return conv(header[key])
        except ValueError:
            raise GridParseError(f"bad value {header[key]!r} for {key}", lineno, 2) from None

    ncols = header_value("ncols", int)
    nrows = header_value("nrows", int)
    xll = header_value("xllcorner", float)
    yll = header_value("yllcorner", float)
    cellsize = header_value("cellsize", float)
    nodata = header_value("nodata_value", int)
    if ncols < 1 or nrows < 1:
        raise GridParseError("ncols and nrows must be positive", 1)
    if not cellsize > 0:
        raise GridParseError("cellsize must be positive", 5)
    if nodata in LEGAL_CODES:
        raise GridParseError(f"NODATA_value {nodata} collides with a D8 code", 6)

    body = lines[6:]
    while body and not body[-1].strip():
        body.pop()
    if len(body) != nrows:
        raise GridParseError(f"expected {nrows} data rows, found {len(body)}", 7 + len(body))

    codes = np.empty((nrows, ncols), dtype=np.int64)
    for row, line in enumerate(body):
        lineno = row + 7
        tokens = line.split()
        if len(tokens) != ncols:
            raise GridParseError(f"expected {ncols} values, found {len(tokens)}", lineno)
        for col, tok in enumerate(tokens):
            try:
                value = int(tok)
            except ValueError:
                raise GridParseError(f"non-integer value {tok!r}", lineno, col + 1) from None
            if value not in LEGAL_CODES and value != nodata:
                raise GridParseError(f"illegal D8 code {value}", lineno, col + 1)
            codes[row, col] = value

    return D8Grid(ncols, nrows, xll, yll, cellsize, nodata, codes)


def _fmt_number(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(float(v))


def serialize_ascii_grid(g: D8Grid) -> str:
    out = [
        f"ncols {g.ncols}",
        f"nrows {g.nrows}",
        f"xllcorner {_fmt_number(g.xllcorner)}",
        f"yllcorner {_fmt_number(g.yllcorner)}",
        f"cellsize {_fmt_number(g.cellsize)}",
        f"nodata_value {g.nodata_code}",
    ]
    for row in g.codes.tolist():
        out.append(" ".join(str(v) for v in row))
    return "\n".join(out) + "\n"


def read_ascii_grid(path) -> D8Grid:
    with open(path, "r", encoding="ascii") as fh:
        return parse_ascii_grid(fh)


def write_ascii_grid(g: D8Grid, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(serialize_ascii_grid(g))


# ---------------------------------------------------------------------------
# Graph view
# ---------------------------------------------------------------------------


def downstream(g: D8Grid, c) -> Union[CellIndex, Outlet]:
    """Cell that ``c`` drains into, or an :class:`Outlet` marker."""
    x, y = c
    if not g.in_range(x, y):
        raise IndexError(f"cell ({x},{y}) outside {g.ncols}x{g.nrows} grid")
    code = int(g.codes[y, x])
    if code == g.nodata_code:
        raise GridError(f"downstream() called on nodata cell ({x},{y})")
    dx, dy = D8_OFFSETS[code]
    nx, ny = x + dx, y + dy
    if not g.in_range(nx, ny):
        return OFF_GRID
    if int(g.codes[ny, nx]) == g.nodata_code:
        return INTO_NODATA
    return CellIndex(nx, ny)


def classify_cell(g: D8Grid, c) -> CellClass:
    if not g.is_valid(c):
        return CellClass.NODATA
    if isinstance(downstream(g, c), Outlet):
        return CellClass.ROOT
    return CellClass.INTERNAL


def inflow_neighbors(g: D8Grid, c) -> list[CellIndex]:
    """Neighbors draining directly into ``c``, in N, NE, E, ..., NW order."""
    x, y = c
    result = []
    for _, dx, dy in NEIGHBOR_ORDER:
        nx, ny = x + dx, y + dy
        if not g.in_range(nx, ny):
            continue
        code = int(g.codes[ny, nx])
        if code == g.nodata_code:
            continue
        ox, oy = D8_OFFSETS[code]
        if nx + ox == x and ny + oy == y:
            result.append(CellIndex(nx, ny))
    return result


def downstream_index(g: D8Grid) -> np.ndarray:
    """Flat row-major index each cell drains into.

    -1 marks roots (off-grid or into nodata), -2 marks nodata cells.
    """
    nrows, ncols = g.shape
    codes = g.codes
    ys, xs = np.indices(g.shape)
    down = np.full(g.shape, -2, dtype=np.int64)
    valid = g.valid_mask
    for code, (dx, dy) in D8_OFFSETS.items():
        sel = valid & (codes == code)
        if not sel.any():
            continue
        nx = xs[sel] + dx
        ny = ys[sel] + dy
        inside = (nx >= 0) & (nx < ncols) & (ny >= 0) & (ny < nrows)
        target = np.full(nx.shape, -1, dtype=np.int64)
        tx, ty = nx[inside], ny[inside]
        tvalid = codes[ty, tx] != g.nodata_code
        idx = np.flatnonzero(inside)
        target[idx[tvalid]] = ty[tvalid] * ncols + tx[tvalid]
        down[sel] = target
    return down.ravel()


def validate_acyclic(g: D8Grid) -> None:
    """Raise :class:`CycleError` unless every valid cell drains to a root.

    Linear time: each cell is walked at most once thanks to a per-cell state
    (0 unseen, 1 on the current path, 2 known to terminate).
    """
    down = downstream_index(g).tolist()
    n = len(down)
    state = [0] * n
    ncols = g.ncols
    for start in range(n):
        if down[start] == -2 or state[start]:
            continue
        path = []
        v = start
        while v >= 0 and state[v] == 0:
            state[v] = 1
            path.append(v)
            v = down[v]
        if v >= 0 and state[v] == 1:
            cycle = path[path.index(v):]
            raise CycleError([CellIndex(i % ncols, i // ncols) for i in cycle])
        for u in path:
            state[u] = 2


def find_crossing_diagonals(g: D8Grid) -> list[tuple[CellIndex, CellIndex]]:
    """2x2 blocks whose two diagonals both carry flow.

    Steepest-descent grids never contain these; the boundary march assumes
    their absence.  Returns the north-west cell and the north-east cell of
    each offending block.
    """
    c = g.codes
    nw, ne, sw, se = c[:-1, :-1], c[:-1, 1:], c[1:, :-1], c[1:, 1:]
    main = (nw == 2) | (se == 32)
    anti = (ne == 8) | (sw == 128)
    ys, xs = np.nonzero(main & anti)
    return [(CellIndex(x, y), CellIndex(x + 1, y)) for x, y in zip(xs.tolist(), ys.tolist())]


# ---------------------------------------------------------------------------
# Lattice geometry
# ---------------------------------------------------------------------------


def corners(c) -> tuple[LatticePoint, LatticePoint, LatticePoint, LatticePoint]:
    """(alpha, beta, gamma, delta) = NW, NE, SE, SW corners of cell ``c``."""
    x, y = c
    return (
        LatticePoint(x, y),
        LatticePoint(x + 1, y),
        LatticePoint(x + 1, y + 1),
        LatticePoint(x, y + 1),
    )


def face_positions(point) -> tuple[tuple[int, int], ...]:
    """Raw (x, y) of the NW, NE, SE, SW faces of a lattice point, unchecked."""
    x, y = point
    return ((x - 1, y - 1), (x, y - 1), (x, y), (x - 1, y))


def faces(g: D8Grid, point) -> tuple[Optional[CellIndex], ...]:
    """(A, B, Theta, Delta) = NW, NE, SE, SW faces around ``point``.

    Faces outside the raster are ``None``.  Nodata faces are returned; callers
    treat them as outside every watershed.
    """
    x, y = point
    if not (0 <= x <= g.ncols and 0 <= y <= g.nrows):
        raise IndexError(f"lattice point ({x},{y}) outside lattice")
    return tuple(
        CellIndex(fx, fy) if g.in_range(fx, fy) else None
        for fx, fy in face_positions(point)
    )


def world_coords(g: D8Grid, point) -> tuple[float, float]:
    x, y = point
    return g.xllcorner + x * g.cellsize, g.yllcorner + (g.nrows - y) * g.cellsize


def cell_at_world(g: D8Grid, X: float, Y: float) -> CellIndex:
    """Cell containing the world coordinate (inverse of :func:`world_coords`)."""
    x = math.floor((X - g.xllcorner) / g.cellsize)
    y = math.floor((g.yllcorner + g.nrows * g.cellsize - Y) / g.cellsize)
    if not g.in_range(x, y):
        raise IndexError(f"world point ({X}, {Y}) outside grid")
    return CellIndex(x, y)

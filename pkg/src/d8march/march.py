"""
Boundary marching over MNS labels.

Given a pour point ``v*`` the march walks the corner lattice around the
watershed of ``v*`` keeping the watershed on its left, so the ring comes out
counterclockwise on a north-up map.  Each visited lattice point costs at most
four label reads, so delineation is linear in the boundary length rather
than in the watershed area.

Headings are 0=N, 1=E, 2=S, 3=W.  After every accepted move the heading is
turned one step clockwise (+1) and each rejected probe turns it one step
counterclockwise (-1): right turn, straight on, left turn, in that order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .grid import (
    D8_OFFSETS,
    CellIndex,
    D8Grid,
    Direction,
    GridError,
    LatticePoint,
    corners,
    face_positions,
)
from .mns import MnsGrid, parent_cell

# Turn applied after a successful probe and after a failed one.
HIT_TURN = +1
MISS_TURN = -1

_MOVES = {
    Direction.N: (0, -1),
    Direction.E: (1, 0),
    Direction.S: (0, 1),
    Direction.W: (-1, 0),
}
_MOVE_LIST = [_MOVES[Direction(i)] for i in range(4)]

# Start tables indexed by lg(code): which corner of v* to start on
# (0=alpha NW, 1=beta NE, 2=gamma SE, 3=delta SW) and the first heading.
START_CORNER = (1, 2, 2, 3, 3, 0, 0, 1)
START_HEADING = (1, 1, 2, 2, 3, 3, 0, 0)

# Index into (A, B, Theta, Delta) of the face left/right of a move.
# Moving N the left face is A (NW); moving E it is B (NE); and so on.
_LEFT_FACE = (0, 1, 2, 3)
_RIGHT_FACE = (1, 2, 3, 0)


class MarchError(RuntimeError):
    """The march got stuck or failed to close; the labels are inconsistent."""


@dataclass
class ReadCounter:
    face_reads: int = 0  # d-label lookups made by boundary_point
    boundary_tests: int = 0
    accepted_moves: int = 0
    probes: int = 0
    max_probes_per_move: int = 0
    flow_reads: int = 0  # direction lookups for the start and pinch corners

    @property
    def total_reads(self) -> int:
        return self.face_reads + self.flow_reads


@dataclass
class MarchState:
    current: LatticePoint
    heading: Direction
    first_edge: Optional[tuple[LatticePoint, LatticePoint]] = None
    probes_this_step: int = 0


@dataclass
class BoundaryPolygon:
    """Closed lattice walk; the first point is not repeated at the end."""

    points: list[LatticePoint] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def edges(self):
        pts = self.points
        return zip(pts, pts[1:] + pts[:1])

    def signed_area(self) -> float:
        return signed_area(self.points)


def signed_area(points) -> float:
    """Shoelace area in cell units, positive for a counterclockwise map ring.

    Lattice y grows southward, so it is negated to get map orientation.
    """
    total = 0
    n = len(points)
    for i in range(n):
        x0, y0 = points[i]
        x1, y1 = points[(i + 1) % n]
        total += x0 * (-y1) - x1 * (-y0)
    return total / 2


def lattice_move(point, heading, shape: Optional[tuple[int, int]] = None) -> LatticePoint:
    """Neighbor of ``point`` one step in ``heading``.

    When ``shape`` (nrows, ncols) is given the result must stay inside the
    ``(ncols+1) x (nrows+1)`` lattice.
    """
    dx, dy = _MOVE_LIST[int(heading) % 4]
    x, y = point[0] + dx, point[1] + dy
    if shape is not None:
        nrows, ncols = shape
        if not (0 <= x <= ncols and 0 <= y <= nrows):
            raise IndexError(f"lattice move to ({x},{y}) leaves the lattice")
    return LatticePoint(x, y)


def _face_flags(m: MnsGrid, point, lo: int, hi: int, counter: Optional[ReadCounter]):
    """Membership of the four faces of ``point`` in the interval [lo, hi]."""
    d_rows = m.d_rows
    ncols, nrows = m.ncols, m.nrows
    flags = []
    reads = 0
    for fx, fy in face_positions(point):
        if 0 <= fx < ncols and 0 <= fy < nrows:
            reads += 1
            dv = d_rows[fy][fx]
            flags.append(dv != 0 and lo <= dv <= hi)
        else:
            flags.append(False)
    if counter is not None:
        counter.face_reads += reads
        counter.boundary_tests += 1
    return flags


def boundary_point(point, v_star, m: MnsGrid, counter: Optional[ReadCounter] = None) -> bool:
    """True when ``point`` touches both the watershed of ``v_star`` and its outside.

    Absent (off-grid) and nodata faces count as outside.
    """
    lo, hi = m.interval(v_star)
    flags = _face_flags(m, point, lo, hi, counter)
    return any(flags) and not all(flags)


def _start_code(v_star, g: Optional[D8Grid], m: MnsGrid, counter: ReadCounter) -> int:
    x, y = v_star
    if g is not None:
        counter.flow_reads += 1
        return int(g.codes[y, x])
    counter.flow_reads += 8
    p = parent_cell(m, v_star)
    if p is not None:
        return _code_between(v_star, p)
    # root: any neighbor outside the watershed will do
    lo, hi = m.interval(v_star)
    for code, (dx, dy) in sorted(D8_OFFSETS.items()):
        nx, ny = x + dx, y + dy
        counter.flow_reads += 1
        if not m.in_range(nx, ny):
            return code
        dn = m.d_rows[ny][nx]
        if dn == 0 or not lo <= dn <= hi:
            return code
    raise MarchError(f"cell ({x},{y}) has no neighbor outside its watershed")


def _code_between(c, target) -> int:
    off = (target[0] - c[0], target[1] - c[1])
    for code, o in D8_OFFSETS.items():
        if o == off:
            return code
    raise ValueError(f"{target} is not adjacent to {c}")


def start_march(v_star, g: Optional[D8Grid], m: MnsGrid,
                counter: Optional[ReadCounter] = None) -> tuple[LatticePoint, Direction]:
    """First lattice point and heading for the march around ``v_star``.

    The corner lies on the edge (or the single corner) shared with the cell
    that ``v_star`` drains into.  With ``g`` omitted the flow direction is
    recovered from the labels.
    """
    if counter is None:
        counter = ReadCounter()
    if not m.is_valid(v_star):
        raise GridError(f"pour point ({v_star[0]},{v_star[1]}) is nodata or off-grid")
    code = _start_code(v_star, g, m, counter)
    idx = code.bit_length() - 1
    point = corners(v_star)[START_CORNER[idx]]
    return point, Direction(START_HEADING[idx])


def _flow_oracle(g: Optional[D8Grid], m: MnsGrid, counter: ReadCounter) -> Callable:
    if g is not None:
        codes = g.codes

        def flows_to(u, v):
            counter.flow_reads += 1
            code = int(codes[u[1], u[0]])
            off = D8_OFFSETS.get(code)
            return off is not None and (u[0] + off[0], u[1] + off[1]) == tuple(v)
    else:

        def flows_to(u, v):
            counter.flow_reads += 8
            p = parent_cell(m, u)
            return p is not None and tuple(p) == tuple(v)

    return flows_to


def delineate(g: Optional[D8Grid], m: MnsGrid, v_star) -> tuple[BoundaryPolygon, ReadCounter]:
    """Watershed boundary of ``v_star`` as a counterclockwise lattice ring.

    ``g`` supplies flow directions for the start corner and for pinch points
    (lattice points where the watershed touches itself diagonally).  Pass
    ``None`` to recover them from ``m``.

    A probe is accepted when the candidate passes :func:`boundary_point` and
    the edge walked to reach it has the watershed on its left and the outside
    on its right.  The edge check rules out points that are on the boundary
    but reached across a one-cell gap, and it forbids doubling back.  At a
    pinch the right turn is taken only if the two inside faces are joined by a
    diagonal flow; otherwise the walk turns left and runs around the outside
    cell that drains through the pinch.  The march stops when its first edge
    comes round again.
    """
    v_star = CellIndex(*v_star)
    if not m.is_valid(v_star):
        raise GridError(f"pour point ({v_star.x},{v_star.y}) is nodata or off-grid")
    counter = ReadCounter()
    lo, hi = m.interval(v_star)
    flows_to = _flow_oracle(g, m, counter)

    start, heading = start_march(v_star, g, m, counter)
    flags = _face_flags(m, start, lo, hi, counter)
    if not (any(flags) and not all(flags)):
        raise MarchError(f"start corner {tuple(start)} is not on the boundary")

    state = MarchState(current=start, heading=heading)
    points = [start]
    limit = 4 * (m.ncols + 1) * (m.nrows + 1) + 8

    while True:
        cur = state.current
        state.probes_this_step = 0
        # the first probe of each step is the right turn
        pinch_turn_blocked = _pinch_blocks_right(cur, flags, flows_to)
        while True:
            state.probes_this_step += 1
            counter.probes += 1
            if state.probes_this_step > 3:
                raise MarchError(f"no boundary move from {tuple(cur)} after 3 probes")
            h = state.heading
            candidate = lattice_move(cur, h)
            edge_ok = flags[_LEFT_FACE[h]] and not flags[_RIGHT_FACE[h]]
            if edge_ok and not (state.probes_this_step == 1 and pinch_turn_blocked):
                cand_flags = _face_flags(m, candidate, lo, hi, counter)
                if any(cand_flags) and not all(cand_flags):
                    break
                raise MarchError(f"edge to {tuple(candidate)} crosses the boundary "
                                 "but the point is not a boundary point")
            state.heading = Direction((h + MISS_TURN) % 4)
        counter.max_probes_per_move = max(counter.max_probes_per_move, state.probes_this_step)

        edge = (cur, candidate)
        if state.first_edge is None:
            state.first_edge = edge
        elif edge == state.first_edge:
            break
        points.append(candidate)
        counter.accepted_moves += 1
        if counter.accepted_moves > limit:
            raise MarchError("march did not close")
        state.current = candidate
        flags = cand_flags
        state.heading = Direction((state.heading + HIT_TURN) % 4)

    # the walk ends back on the start point; keep it only once
    points.pop()
    return BoundaryPolygon(points), counter


def _pinch_blocks_right(point, flags, flows_to) -> bool:
    """At a pinch, whether the right-turn continuation must be skipped."""
    a, b, t, dl = flags
    if not (a == t and b == dl and a != b):
        return False
    nw, ne, se, sw = face_positions(point)
    if a:
        i1, i2 = nw, se
    else:
        i1, i2 = ne, sw
    joined = flows_to(i1, i2) or flows_to(i2, i1)
    return not joined

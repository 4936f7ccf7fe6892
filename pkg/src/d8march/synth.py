"""
Seeded generators of valid (acyclic) D8 grids.

Randomness comes from ``numpy.random.default_rng(seed)`` (PCG64), so a seed
reproduces the same grid on any platform numpy supports.
"""

from __future__ import annotations

import math

import numpy as np

from .grid import (
    D8_OFFSETS,
    NEIGHBOR_ORDER,
    OFFSET_TO_CODE,
    ORDERED_CODES,
    CellIndex,
    D8Grid,
    GridError,
)

DEFAULT_NODATA = -9999
_CARDINAL_OUT = (("N", 0, -1), ("E", 1, 0), ("S", 0, 1), ("W", -1, 0))


class PitError(GridError):
    def __init__(self, x: int, y: int):
        self.cell = CellIndex(x, y)
        super().__init__(f"unfilled pit at ({x},{y})")


def default_outlet(ncols: int, nrows: int) -> CellIndex:
    """Middle of the southern row."""
    return CellIndex(ncols // 2, nrows - 1)


def _off_grid_code(x, y, ncols, nrows):
    """First cardinal direction (N, E, S, W) leaving the grid, else None."""
    for _, dx, dy in _CARDINAL_OUT:
        if not (0 <= x + dx < ncols and 0 <= y + dy < nrows):
            return OFFSET_TO_CODE[(dx, dy)]
    return None


def gen_cone(ncols: int, nrows: int, outlet=None) -> D8Grid:
    """Every cell drains to the neighbor closest (Euclidean) to ``outlet``.

    Ties go to the first neighbor in N, NE, ..., NW order.  A border outlet
    drains off-grid.  An interior outlet drains along a straight channel to
    the nearest border so that the grid stays acyclic.
    """
    if ncols < 1 or nrows < 1:
        raise GridError("dims must be >= 1")
    if outlet is None:
        outlet = default_outlet(ncols, nrows)
    ox, oy = outlet
    if not (0 <= ox < ncols and 0 <= oy < nrows):
        raise GridError(f"outlet ({ox},{oy}) outside grid")

    ys, xs = np.indices((nrows, ncols))
    best = np.full((nrows, ncols), np.iinfo(np.int64).max, dtype=np.int64)
    codes = np.zeros((nrows, ncols), dtype=np.int64)
    for (_, dx, dy), code in zip(NEIGHBOR_ORDER, ORDERED_CODES):
        nx, ny = xs + dx, ys + dy
        inside = (nx >= 0) & (nx < ncols) & (ny >= 0) & (ny < nrows)
        # squared distances are exact integers, so ties are exact
        dist = (nx - ox) ** 2 + (ny - oy) ** 2
        better = inside & (dist < best)
        best[better] = dist[better]
        codes[better] = code

    exit_code = _off_grid_code(ox, oy, ncols, nrows)
    if exit_code is not None:
        codes[oy, ox] = exit_code
    else:
        # channel to the nearest border, ties in N, E, S, W order
        reach = {"N": oy + 1, "E": ncols - ox, "S": nrows - oy, "W": ox + 1}
        name, dx, dy = min(_CARDINAL_OUT, key=lambda t: reach[t[0]])
        code = OFFSET_TO_CODE[(dx, dy)]
        x, y = ox, oy
        while 0 <= x < ncols and 0 <= y < nrows:
            codes[y, x] = code
            x, y = x + dx, y + dy
    return D8Grid(ncols, nrows, 0.0, 0.0, 1.0, DEFAULT_NODATA, codes)


def _crosses(codes, x, y, dx, dy) -> bool:
    """Would a diagonal step from (x, y) by (dx, dy) cross an existing one?"""
    # flanking cells of the step
    ax, ay = x + dx, y
    bx, by = x, y + dy
    ca, cb = codes[ay][ax], codes[by][bx]
    return (ca != 0 and D8_OFFSETS[ca] == (-dx, dy)) or (
        cb != 0 and D8_OFFSETS[cb] == (dx, -dy)
    )


def gen_random_forest(ncols: int, nrows: int, seed: int, root_fraction: float = 0.02) -> D8Grid:
    """Random spanning forest of the 8-connected grid.

    Roots are sampled from border cells (they must drain off-grid), about
    ``root_fraction * ncols * nrows`` of them and at least one.  The forest
    then grows by repeatedly attaching a random frontier cell to a random
    tree neighbor; the new cell's code points at that neighbor.  Diagonal
    links that would cross an existing diagonal are skipped, as in any
    steepest-descent grid.
    """
    if ncols < 1 or nrows < 1:
        raise GridError("dims must be >= 1")
    if not 0 < root_fraction <= 1:
        raise GridError("root_fraction must be in (0, 1]")
    rng = np.random.default_rng(seed)
    n = ncols * nrows
    border = [
        (x, y)
        for y in range(nrows)
        for x in range(ncols)
        if x in (0, ncols - 1) or y in (0, nrows - 1)
    ]
    n_roots = min(len(border), max(1, int(round(root_fraction * n))))
    picks = rng.choice(len(border), size=n_roots, replace=False)

    codes = [[0] * ncols for _ in range(nrows)]
    frontier: list[tuple[int, int, int, int]] = []  # (tree x, y, new x, y)

    def attach(x, y):
        for _, dx, dy in NEIGHBOR_ORDER:
            nx, ny = x + dx, y + dy
            if 0 <= nx < ncols and 0 <= ny < nrows and codes[ny][nx] == 0:
                frontier.append((x, y, nx, ny))

    for i in sorted(picks.tolist()):
        x, y = border[i]
        outs = [
            OFFSET_TO_CODE[(dx, dy)]
            for _, dx, dy in _CARDINAL_OUT
            if not (0 <= x + dx < ncols and 0 <= y + dy < nrows)
        ]
        codes[y][x] = outs[int(rng.integers(len(outs)))]
    for i in sorted(picks.tolist()):
        attach(*border[i])

    assigned = n_roots
    while assigned < n:
        j = int(rng.integers(len(frontier)))
        frontier[j], frontier[-1] = frontier[-1], frontier[j]
        px, py, cx, cy = frontier.pop()
        if codes[cy][cx]:
            continue
        dx, dy = px - cx, py - cy
        if dx and dy and _crosses(codes, cx, cy, dx, dy):
            continue
        codes[cy][cx] = OFFSET_TO_CODE[(dx, dy)]
        assigned += 1
        attach(cx, cy)

    return D8Grid(ncols, nrows, 0.0, 0.0, 1.0, DEFAULT_NODATA, np.array(codes))


def gen_from_dem(heights, nodata_mask=None, cellsize: float = 1.0) -> D8Grid:
    """Steepest-descent D8 directions from an elevation table.

    Slopes are drop over distance (1 for cardinal, sqrt(2) for diagonal
    neighbors); ties go to the first neighbor in N, NE, ..., NW order.  A
    border cell with no lower neighbor drains off-grid toward the steepest
    linearly extrapolated outside neighbor.  An interior cell with no lower
    neighbor raises :class:`PitError`.  Masked cells become nodata.
    """
    h = np.asarray(heights, dtype=float)
    if h.ndim != 2:
        raise GridError("heights must be a 2-D table")
    nrows, ncols = h.shape
    mask = np.zeros(h.shape, dtype=bool) if nodata_mask is None else np.asarray(nodata_mask, bool)
    if not np.isfinite(h[~mask]).all():
        raise GridError("heights must be finite outside the nodata mask")

    codes = np.full(h.shape, DEFAULT_NODATA, dtype=np.int64)
    for y in range(nrows):
        for x in range(ncols):
            if mask[y, x]:
                continue
            z = h[y, x]
            best_slope, best_code = 0.0, None
            off_grid = []
            for (_, dx, dy), code in zip(NEIGHBOR_ORDER, ORDERED_CODES):
                nx, ny = x + dx, y + dy
                dist = math.sqrt(2.0) if dx and dy else 1.0
                if not (0 <= nx < ncols and 0 <= ny < nrows):
                    off_grid.append((dx, dy, code, dist))
                    continue
                if mask[ny, nx]:
                    continue
                slope = (z - h[ny, nx]) / dist
                if slope > best_slope:
                    best_slope, best_code = slope, code
            if best_code is not None:
                codes[y, x] = best_code
                continue
            if not off_grid:
                raise PitError(x, y)
            codes[y, x] = _border_exit(h, mask, x, y, off_grid)
    return D8Grid(ncols, nrows, 0.0, 0.0, cellsize, DEFAULT_NODATA, codes)


def _border_exit(h, mask, x, y, off_grid) -> int:
    nrows, ncols = h.shape
    z = h[y, x]
    best_slope, best_code = -math.inf, None
    for dx, dy, code, dist in off_grid:
        bx, by = x - dx, y - dy
        if 0 <= bx < ncols and 0 <= by < nrows and not mask[by, bx]:
            outside = 2 * z - h[by, bx]
        else:
            outside = z
        slope = (z - outside) / dist
        if slope > best_slope:
            best_slope, best_code = slope, code
    return best_code


def cone_heights(ncols: int, nrows: int, outlet=None) -> np.ndarray:
    """Euclidean distance to ``outlet``: the DEM analogue of :func:`gen_cone`."""
    if outlet is None:
        outlet = default_outlet(ncols, nrows)
    ys, xs = np.indices((nrows, ncols))
    return np.hypot(xs - outlet[0], ys - outlet[1])


def slope_heights(ncols: int, nrows: int, pit=None) -> np.ndarray:
    """Plane falling to the east, optionally with one cell dug below its neighbors."""
    _, xs = np.indices((nrows, ncols))
    h = (ncols - xs).astype(float)
    if pit is not None:
        px, py = pit
        h[py, px] = h.min() - 1.0
    return h

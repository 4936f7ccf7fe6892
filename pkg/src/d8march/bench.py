"""
Read-count benchmarking of the marcher against the flood-fill baseline,
plus the power-law fit and extrapolation arithmetic used to compare them.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import astuple, dataclass, fields
from typing import Iterable, Optional

import numpy as np

from .grid import CellIndex, D8Grid, world_coords
from .march import BoundaryPolygon, delineate
from .mns import MnsGrid
from .oracle import flood_fill_watershed

# Reference fit for extrapolation (boundary points -> baseline reads).
PUBLISHED_FIT_C = 0.1967
PUBLISHED_FIT_B = 1.7986
PUBLISHED_FIT_R2 = 0.98
AMAZON_AREA_KM2 = 6.1e6

CSV_HEADER = ("pour_x", "pour_y", "area_cells", "boundary_points",
              "hsm_face_reads", "baseline_cell_reads")


@dataclass(frozen=True)
class BenchmarkRecord:
    pour_x: int
    pour_y: int
    area_cells: int
    boundary_points: int
    hsm_face_reads: int
    baseline_cell_reads: int

    @property
    def reduction(self) -> float:
        return 1.0 - self.hsm_face_reads / self.baseline_cell_reads


@dataclass(frozen=True)
class PowerLawFit:
    c: float
    b: float
    r2: float
    n_points: int

    def __call__(self, x):
        return self.c * np.asarray(x, dtype=float) ** self.b


def fit_power_law(pairs: Iterable[tuple[float, float]]) -> PowerLawFit:
    """Least-squares fit of ``y = c * x**b`` on log-log axes."""
    data = np.asarray(list(pairs), dtype=float)
    if data.ndim != 2 or data.shape[0] < 3 or data.shape[1] != 2:
        raise ValueError("need at least 3 (x, y) pairs")
    if not (data > 0).all():
        raise ValueError("power-law fit needs strictly positive x and y")
    lx, ly = np.log(data[:, 0]), np.log(data[:, 1])
    sxx = np.sum((lx - lx.mean()) ** 2)
    if sxx == 0:
        raise ValueError("degenerate fit: all x values are equal")
    slope = np.sum((lx - lx.mean()) * (ly - ly.mean())) / sxx
    intercept = ly.mean() - slope * lx.mean()
    resid = ly - (intercept + slope * lx)
    syy = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 if syy == 0 else 1.0 - np.sum(resid ** 2) / syy
    return PowerLawFit(float(math.exp(intercept)), float(slope), float(r2), len(data))


def predict_marches(fit: PowerLawFit, area_cells: float) -> float:
    """Boundary points whose predicted baseline read count is ``area_cells``."""
    if area_cells < 1:
        raise ValueError("area_cells must be >= 1")
    return (area_cells / fit.c) ** (1.0 / fit.b)


def resolution_factor(coarse_cellsize: float, fine_cellsize: float) -> float:
    """Growth in cell count when refining the raster, e.g. 30 m -> 1 m gives 900."""
    return (coarse_cellsize / fine_cellsize) ** 2


def area_to_cells(area_km2: float, cellsize_m: float) -> float:
    return area_km2 * 1e6 / (cellsize_m * cellsize_m)


def published_fit() -> PowerLawFit:
    return PowerLawFit(PUBLISHED_FIT_C, PUBLISHED_FIT_B, PUBLISHED_FIT_R2, 14718)


def measure(g: D8Grid, m: MnsGrid, pour) -> BenchmarkRecord:
    polygon, hsm = delineate(g, m, pour)
    cells, baseline = flood_fill_watershed(g, pour)
    return BenchmarkRecord(
        pour_x=int(pour[0]),
        pour_y=int(pour[1]),
        area_cells=cells.cardinality,
        boundary_points=len(polygon),
        hsm_face_reads=hsm.total_reads,
        baseline_cell_reads=baseline.face_reads,
    )


def sample_pour_points(g: D8Grid, sample: int, seed: int) -> list[CellIndex]:
    """``sample`` distinct valid cells chosen uniformly, in row-major order."""
    if sample < 1:
        raise ValueError("sample must be >= 1")
    valid = np.flatnonzero(g.valid_mask.ravel())
    rng = np.random.default_rng(seed)
    take = rng.choice(valid.size, size=min(sample, valid.size), replace=False)
    flat = np.sort(valid[take])
    return [CellIndex(int(i % g.ncols), int(i // g.ncols)) for i in flat]


def run_benchmark(g: D8Grid, m: MnsGrid, sample: int, seed: int) -> list[BenchmarkRecord]:
    return [measure(g, m, p) for p in sample_pour_points(g, sample, seed)]


def fit_records(records: Iterable[BenchmarkRecord]) -> PowerLawFit:
    """Baseline reads (y) against boundary points (x)."""
    return fit_power_law((r.boundary_points, r.baseline_cell_reads) for r in records)


def records_to_csv(records: Iterable[BenchmarkRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow(astuple(r))
    return buf.getvalue()


def records_from_csv(text: str) -> list[BenchmarkRecord]:
    reader = csv.reader(io.StringIO(text))
    header = tuple(next(reader))
    if header != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {header}")
    names = [f.name for f in fields(BenchmarkRecord)]
    return [BenchmarkRecord(**dict(zip(names, map(int, row)))) for row in reader if row]


# ---------------------------------------------------------------------------
# polygon output
# ---------------------------------------------------------------------------


def _ring(grid, polygon: BoundaryPolygon) -> list[tuple[float, float]]:
    ring = [world_coords(grid, p) for p in polygon.points]
    ring.append(ring[0])
    return ring


def polygon_wkt(grid, polygon: BoundaryPolygon) -> str:
    """``grid`` is anything with the raster header (a D8Grid or MnsGrid)."""
    coords = ", ".join(f"{X:.6f} {Y:.6f}" for X, Y in _ring(grid, polygon))
    return f"POLYGON(({coords}))"


def polygon_geojson(grid, polygon: BoundaryPolygon, properties: Optional[dict] = None) -> str:
    coords = ", ".join(f"[{X:.6f}, {Y:.6f}]" for X, Y in _ring(grid, polygon))
    props = ", ".join(f'"{k}": {int(v)}' for k, v in (properties or {}).items())
    return (
        '{"type": "Feature", "properties": {' + props + '}, '
        '"geometry": {"type": "Polygon", "coordinates": [[' + coords + "]]}}"
    )

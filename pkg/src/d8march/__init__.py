"""Watershed boundaries from D8 flow grids by marching MNS interval labels."""

from .grid import (
    CellClass,
    CellIndex,
    CycleError,
    D8Grid,
    Direction,
    GridError,
    GridParseError,
    LatticePoint,
    classify_cell,
    corners,
    downstream,
    faces,
    inflow_neighbors,
    parse_ascii_grid,
    serialize_ascii_grid,
    validate_acyclic,
    world_coords,
)
from .march import BoundaryPolygon, ReadCounter, boundary_point, delineate, lattice_move, start_march
from .mns import MnsGrid, TraversalStats, compute_mns, read_mns, subtree_contains, write_mns
from .oracle import CellSet, cellset_boundary, equivalent, flood_fill_watershed, polygon_to_edges

__version__ = "0.1.0"

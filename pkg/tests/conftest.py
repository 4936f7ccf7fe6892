import sys

import pytest

from d8march.grid import D8Grid

ND = -9999


def grid(rows, nodata=ND, **kw):
    return D8Grid.from_codes(rows, nodata_code=nodata, **kw)


@pytest.fixture
def single():
    return grid([[64]])


@pytest.fixture
def chain():
    # west -> middle -> east -> off-grid east
    return grid([[1, 1, 1]])


@pytest.fixture
def pinch():
    # (1,1) drains NW into (0,0): watershed of (0,0) is two cells touching at a corner
    return grid([[64, 64], [16, 32]])


@pytest.fixture
def hole():
    # (1,1) is walled in on four sides by the watershed of (2,2) and escapes
    # diagonally to (0,0)
    return grid([
        [64, 2, 64],
        [2, 32, 4],
        [16, 1, 4],
    ])


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)


def check_delineation(g, m, pour, use_flow=True):
    """Delineate ``pour`` and compare with flood fill; returns (polygon, counter)."""
    from d8march.march import delineate
    from d8march.oracle import equivalent, flood_fill_watershed

    polygon, counter = delineate(g if use_flow else None, m, pour)
    cells, _ = flood_fill_watershed(g, pour)
    assert equivalent(polygon, cells), f"pour {pour}"
    assert polygon.signed_area() == cells.cardinality == m.area(pour)
    return polygon, counter

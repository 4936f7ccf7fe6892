"""Command line entry point: ``d8march <subcommand> ...``.

Exit codes: 0 success, 1 verification failure, 2 bad input, 3 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import bench, synth
from .grid import (
    CellIndex,
    CycleError,
    GridError,
    cell_at_world,
    read_ascii_grid,
    validate_acyclic,
    write_ascii_grid,
)
from .march import MarchError, delineate
from .mns import MnsFormatError, compute_mns, load_mns, save_mns
from .oracle import equivalent, flood_fill_watershed

log = logging.getLogger("d8march")

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_IO = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed {text} is not an unsigned 64-bit integer")
    return value


def _pair(text: str, conv=int):
    try:
        a, b = text.split(",")
        return conv(a), conv(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected X,Y but got {text!r}") from None


def _load_grid(path):
    try:
        return read_ascii_grid(path)
    except OSError as e:
        raise CliError(f"cannot read {path}: {e}", EXIT_IO) from e
    except GridError as e:
        raise CliError(f"{path}: {e}", EXIT_INPUT) from e


def _load_mns(path):
    try:
        return load_mns(path)
    except OSError as e:
        raise CliError(f"cannot read {path}: {e}", EXIT_IO) from e
    except MnsFormatError as e:
        raise CliError(f"{path}: {e}", EXIT_INPUT) from e


def _write_text(path, text: str):
    try:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
    except OSError as e:
        raise CliError(f"cannot write {path}: {e}", EXIT_IO) from e


def _labels(g):
    try:
        validate_acyclic(g)
    except CycleError as e:
        raise CliError(str(e), EXIT_INPUT) from e
    return compute_mns(g)


# ---------------------------------------------------------------------------


def cmd_preprocess(args) -> int:
    g = _load_grid(args.fdg)
    m, stats = _labels(g)
    try:
        save_mns(m, args.out)
    except OSError as e:
        raise CliError(f"cannot write {args.out}: {e}", EXIT_IO) from e
    print(f"n_valid={m.n_valid}")
    print(f"pushes={stats.pushes}")
    print(f"pops={stats.pops}")
    print(f"cells_labeled={stats.cells_labeled}")
    return EXIT_OK


def cmd_delineate(args) -> int:
    m = _load_mns(args.mns)
    g = _load_grid(args.fdg) if args.fdg else None
    try:
        if args.world:
            X, Y = _pair(args.pour, float)
            pour = cell_at_world(m, X, Y)
        else:
            pour = CellIndex(*_pair(args.pour))
    except (argparse.ArgumentTypeError, IndexError) as e:
        raise CliError(str(e), EXIT_INPUT) from e
    if not m.is_valid(pour):
        raise CliError(f"pour point {pour.x},{pour.y} is off-grid or nodata", EXIT_INPUT)
    polygon, counter = delineate(g, m, pour)
    if args.format == "wkt":
        print(bench.polygon_wkt(m, polygon))
    else:
        props = {"pour_x": pour.x, "pour_y": pour.y, "area_cells": m.area(pour)}
        print(bench.polygon_geojson(m, polygon, props))
    if args.count_reads:
        for key in ("face_reads", "flow_reads", "boundary_tests", "accepted_moves",
                    "probes", "max_probes_per_move"):
            print(f"{key}={getattr(counter, key)}", file=sys.stderr)
        print(f"total_reads={counter.total_reads}", file=sys.stderr)
        print(f"boundary_points={len(polygon)}", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    g = _load_grid(args.fdg)
    if args.mns:
        m = _load_mns(args.mns)
        if m.shape != g.shape:
            raise CliError("MNS file and flow grid have different dimensions", EXIT_INPUT)
    else:
        m, _ = _labels(g)
    if args.sample:
        pours = bench.sample_pour_points(g, args.sample, args.seed)
    else:
        pours = list(g.cells())
    passed = failed = 0
    first_failure = None
    for pour in pours:
        try:
            polygon, _ = delineate(g, m, pour)
            cells, _ = flood_fill_watershed(g, pour)
            ok = (
                equivalent(polygon, cells)
                and m.area(pour) == cells.cardinality
                and polygon.signed_area() == cells.cardinality
            )
        except (MarchError, GridError, ValueError, IndexError) as e:
            log.debug("pour point %s: %s", pour, e)
            ok = False
        if ok:
            passed += 1
        else:
            failed += 1
            if first_failure is None:
                first_failure = pour
    print(f"checked={passed + failed}")
    print(f"passed={passed}")
    print(f"failed={failed}")
    if failed:
        print(f"first failing pour point {first_failure.x},{first_failure.y}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_benchmark(args) -> int:
    g = _load_grid(args.fdg)
    m = _load_mns(args.mns)
    if m.shape != g.shape:
        raise CliError("MNS file and flow grid have different dimensions", EXIT_INPUT)
    if args.sample < 1:
        raise CliError("--sample must be >= 1", EXIT_INPUT)
    records = bench.run_benchmark(g, m, args.sample, args.seed)
    _write_text(args.out, bench.records_to_csv(records))
    print(f"records={len(records)}")
    try:
        fit = bench.fit_records(records)
    except ValueError as e:
        print(f"power-law fit unavailable: {e}", file=sys.stderr)
        return EXIT_OK
    print(f"c={fit.c:.6g}")
    print(f"b={fit.b:.6g}")
    print(f"r2={fit.r2:.6g}")
    print(f"n_points={fit.n_points}")
    return EXIT_OK


def cmd_generate(args) -> int:
    ncols, nrows = args.cols, args.rows
    try:
        if args.kind == "cone":
            outlet = _pair(args.outlet) if args.outlet else None
            g = synth.gen_cone(ncols, nrows, outlet)
        elif args.kind == "forest":
            g = synth.gen_random_forest(ncols, nrows, args.seed, args.root_fraction)
        else:
            pit = _pair(args.pit) if args.pit else None
            g = synth.gen_from_dem(synth.slope_heights(ncols, nrows, pit))
    except (GridError, argparse.ArgumentTypeError) as e:
        raise CliError(str(e), EXIT_INPUT) from e
    if args.cellsize != 1.0 or args.xll or args.yll:
        g = type(g)(g.ncols, g.nrows, args.xll, args.yll, args.cellsize, g.nodata_code, g.codes)
    try:
        write_ascii_grid(g, args.out)
    except OSError as e:
        raise CliError(f"cannot write {args.out}: {e}", EXIT_IO) from e
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="d8march",
        description="Watershed polygons from D8 flow grids by boundary marching.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="label a flow grid and write the MNS file")
    p.add_argument("fdg", help="ESRI ASCII D8 grid")
    p.add_argument("out", help="output MNS file")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("delineate", help="print one watershed polygon")
    p.add_argument("mns", help="MNS file from 'preprocess'")
    p.add_argument("--pour", required=True, help="pour point as X,Y cell indices")
    p.add_argument("--world", action="store_true", help="read --pour as world X,Y")
    p.add_argument("--format", choices=("geojson", "wkt"), default="geojson")
    p.add_argument("--count-reads", action="store_true", help="read counters on stderr")
    p.add_argument("--fdg", help="optional flow grid; otherwise directions come from labels")
    p.set_defaults(func=cmd_delineate)

    p = sub.add_parser("verify", help="compare marching against flood fill")
    p.add_argument("fdg", help="ESRI ASCII D8 grid")
    p.add_argument("--mns", help="check this MNS file instead of fresh labels")
    p.add_argument("--sample", type=int, default=0, help="random pour points (0 = all)")
    p.add_argument("--seed", type=_u64, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("benchmark", help="read counts for sampled pour points")
    p.add_argument("--mns", required=True)
    p.add_argument("--fdg", required=True)
    p.add_argument("--sample", type=int, default=100)
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--out", required=True, help="CSV output path")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("generate", help="write a synthetic flow grid")
    p.add_argument("kind", choices=("cone", "forest", "dem-slope"))
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--root-fraction", type=float, default=0.02)
    p.add_argument("--outlet", help="cone outlet X,Y (default: middle of south row)")
    p.add_argument("--pit", help="dem-slope: dig a pit at X,Y")
    p.add_argument("--cellsize", type=float, default=1.0)
    p.add_argument("--xll", type=float, default=0.0)
    p.add_argument("--yll", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code else EXIT_OK
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code


if __name__ == "__main__":
    sys.exit(main())

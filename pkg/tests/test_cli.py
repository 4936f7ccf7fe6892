import json
import struct

import pytest

from d8march.bench import records_from_csv
from d8march.cli import main
from d8march.grid import read_ascii_grid
from d8march.mns import load_mns


@pytest.fixture
def forest(tmp_path):
    fdg = tmp_path / "forest.asc"
    assert main(["generate", "forest", "--cols", "24", "--rows", "20", "--seed", "3",
                 "--out", str(fdg)]) == 0
    mns = tmp_path / "forest.mns"
    assert main(["preprocess", str(fdg), str(mns)]) == 0
    return fdg, mns


def test_preprocess_reports_counts(forest, capsys, tmp_path):
    fdg, _ = forest
    out = tmp_path / "again.mns"
    capsys.readouterr()
    assert main(["preprocess", str(fdg), str(out)]) == 0
    lines = capsys.readouterr().out.split()
    assert "n_valid=480" in lines and "pushes=480" in lines and "pops=480" in lines


def test_delineate_geojson(forest, capsys):
    _, mns = forest
    capsys.readouterr()
    assert main(["delineate", str(mns), "--pour", "5,5", "--count-reads"]) == 0
    captured = capsys.readouterr()
    feature = json.loads(captured.out)
    ring = feature["geometry"]["coordinates"][0]
    assert ring[0] == ring[-1]
    assert feature["properties"]["pour_x"] == 5
    assert "total_reads=" in captured.err


def test_delineate_wkt_world(tmp_path, capsys):
    fdg = tmp_path / "cone.asc"
    assert main(["generate", "cone", "--cols", "4", "--rows", "4", "--cellsize", "30",
                 "--xll", "100", "--yll", "200", "--out", str(fdg)]) == 0
    g = read_ascii_grid(fdg)
    assert g.cellsize == 30 and g.xllcorner == 100
    mns = tmp_path / "cone.mns"
    assert main(["preprocess", str(fdg), str(mns)]) == 0
    capsys.readouterr()
    assert main(["delineate", str(mns), "--pour", "175,215", "--world",
                 "--format", "wkt", "--fdg", str(fdg)]) == 0
    out = capsys.readouterr().out.strip()
    assert out.startswith("POLYGON((")
    assert "100.000000 200.000000" in out and "220.000000 320.000000" in out


def test_delineate_bad_pour(forest):
    _, mns = forest
    assert main(["delineate", str(mns), "--pour", "99,0"]) == 2
    assert main(["delineate", str(mns), "--pour", "nonsense"]) == 2


def test_verify_passes(forest, capsys):
    fdg, _ = forest
    capsys.readouterr()
    assert main(["verify", str(fdg)]) == 0
    assert "failed=0" in capsys.readouterr().out


def test_verify_corrupted_mns(forest, capsys):
    fdg, mns = forest
    raw = bytearray(mns.read_bytes())
    # swap the d labels of two cells in the body
    off = struct.calcsize("<4sIIddd")
    a, b = off, off + 16 * 7
    raw[a:a + 8], raw[b:b + 8] = raw[b:b + 8], raw[a:a + 8]
    mns.write_bytes(bytes(raw))
    load_mns(mns)  # still well formed
    capsys.readouterr()
    assert main(["verify", str(fdg), "--mns", str(mns)]) == 1
    assert "first failing pour point" in capsys.readouterr().err


def test_benchmark_csv(forest, tmp_path, capsys):
    fdg, mns = forest
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["benchmark", "--mns", str(mns), "--fdg", str(fdg), "--sample", "30", "--seed", "9"]
    assert main(args + ["--out", str(out1)]) == 0
    assert "b=" in capsys.readouterr().out
    assert main(args + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert len(records_from_csv(out1.read_text())) == 30


def test_generate_pit_exit_code(tmp_path, capsys):
    rc = main(["generate", "dem-slope", "--cols", "5", "--rows", "5", "--pit", "2,2",
               "--out", str(tmp_path / "x.asc")])
    assert rc == 2
    assert "unfilled pit at (2,2)" in capsys.readouterr().err


def test_cycle_and_missing_file(tmp_path):
    bad = tmp_path / "cycle.asc"
    bad.write_text("ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n"
                   "nodata_value -9999\n1 16\n")
    assert main(["preprocess", str(bad), str(tmp_path / "o.mns")]) == 2
    assert main(["preprocess", str(tmp_path / "missing.asc"), str(tmp_path / "o.mns")]) == 3


def test_bad_mns_magic(forest, tmp_path):
    _, mns = forest
    raw = bytearray(mns.read_bytes())
    raw[:4] = b"MNSX"
    mns.write_bytes(bytes(raw))
    assert main(["delineate", str(mns), "--pour", "0,0"]) == 2


def test_usage_error():
    assert main(["generate", "cone"]) == 2
    assert main(["verify", "x.asc", "--seed", "-1"]) == 2

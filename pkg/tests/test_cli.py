import json

import numpy as np
import pytest

from tierblocks.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main


@pytest.fixture(scope="module")
def prepared(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    stem = root / "table"
    assert main(["ingest", "--synthetic", "clustered", "--rows", "3000", "--dims", "3", "--out", str(stem)]) == 0
    wl = root / "wl"
    assert main(["workload", "--table", str(stem), "--count", "15", "--intervals", "4", "--out", str(wl)]) == 0
    return root, stem, wl


def sim(prepared, out, *extra):
    _, stem, wl = prepared
    return main(["simulate", "--table", str(stem), "--workload", str(wl), "--out", str(out),
                 "--block-size", "150", "--page-size", "30", "--budgets", "5%,20%", *extra])


def test_ingest_writes_cache_and_provenance(prepared):
    root, stem, _ = prepared
    assert stem.with_suffix(".bin").exists() and stem.with_suffix(".schema").exists()
    prov = json.loads((root / "table.prov.json").read_text())
    assert prov["rows"] == 3000 and "config_hash" in prov["provenance"]


def test_ingest_csv(tmp_path):
    (tmp_path / "a.csv").write_text("x,k\n1,b\n2,a\n")
    (tmp_path / "s.txt").write_text("x,numeric\nk,categorical\n")
    assert main(["ingest", str(tmp_path / "a.csv"), "--schema", str(tmp_path / "s.txt"),
                 "--out", str(tmp_path / "t")]) == EXIT_OK
    (tmp_path / "b.csv").write_text("x,k\nz,b\n")
    assert main(["ingest", str(tmp_path / "b.csv"), "--schema", str(tmp_path / "s.txt"),
                 "--out", str(tmp_path / "u")]) == EXIT_DATA


def test_simulate_is_byte_identical(prepared, tmp_path):
    assert sim(prepared, tmp_path / "a", "--method", "brame-s,kdtree") == 0
    assert sim(prepared, tmp_path / "b", "--method", "brame-s,kdtree") == 0
    for name in ("metrics.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def untimed(d):
        # solve_time is wall clock and is the only column allowed to differ
        return [l.rsplit(",", 1)[0] for l in (d / "migrations.csv").read_text().splitlines()]

    assert untimed(tmp_path / "a") == untimed(tmp_path / "b")
    header = (tmp_path / "a" / "migrations.csv").read_text().splitlines()
    assert [l for l in header if not l.startswith("#")][0].startswith("method,budget,period")


def test_three_tier_and_report(prepared, tmp_path, capsys):
    assert sim(prepared, tmp_path, "--task", "three-tier", "--capacities", "1%,4%", "--policy", "arc") == 0
    assert main(["report", str(tmp_path / "metrics.csv"), str(tmp_path / "summary.json")]) == 0
    assert "three-tier" in capsys.readouterr().out


def test_blocks_manifest_covers_every_row_once(prepared, tmp_path):
    _, stem, wl = prepared
    assert main(["blocks", "--table", str(stem), "--workload", str(wl), "--out", str(tmp_path),
                 "--method", "brame-h", "--block-size", "150", "--page-size", "30"]) == 0
    doc = json.loads((tmp_path / "manifest.json").read_text())
    rows = []

    def walk(rec):
        if rec["kind"] == "leaf":
            assert len(rec["rows"]) <= 150
            rows.extend(rec["rows"])
        for c in rec.get("children", []):
            walk(c)

    for tree in doc["trees"]:
        walk(tree["root"])
    assert sorted(rows) == list(range(3000)) and doc["rows"] == 3000
    assert main(["report", str(tmp_path / "partition.json")]) == 0


def test_config_file_and_flag_override(prepared, tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[layout]\nblock_size = 400\n[sim]\nbudgets = 10%\nmethod = kdtree\n")
    _, stem, wl = prepared
    assert main(["simulate", "--config", str(cfg), "--table", str(stem), "--workload", str(wl),
                 "--out", str(tmp_path / "o")]) == 0
    text = (tmp_path / "o" / "metrics.csv").read_text()
    assert "kdtree,0.1," in text
    assert main(["simulate", "--config", str(cfg), "--budgets", "0.2", "--table", str(stem),
                 "--workload", str(wl), "--out", str(tmp_path / "p")]) == 0
    assert "kdtree,0.2," in (tmp_path / "p" / "metrics.csv").read_text()


def test_multiple_seeds_label_methods(prepared, tmp_path):
    assert sim(prepared, tmp_path, "--method", "kdtree", "--seeds", "1,2") == 0
    text = (tmp_path / "metrics.csv").read_text()
    assert "kdtree@1" in text and "kdtree@2" in text


@pytest.mark.parametrize("argv", [
    [],
    ["simulate"],
    ["bogus"],
    ["ingest", "--out", "x"],
    ["simulate", "--table", "t", "--workload", "w", "--out", "o", "--method", "zorder"],
    ["simulate", "--table", "t", "--workload", "w", "--out", "o", "--method", "brame-h", "--filter", "soft"],
    ["simulate", "--table", "t", "--workload", "w", "--out", "o", "--gamma", "2"],
    ["simulate", "--table", "t", "--workload", "w", "--out", "o", "--budgets", "150%"],
])
def test_usage_errors(argv):
    assert main(argv) == EXIT_USAGE


def test_unknown_config_key(prepared, tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[x]\ncolour = red\n")
    _, stem, wl = prepared
    assert main(["simulate", "--config", str(cfg), "--table", str(stem), "--workload", str(wl),
                 "--out", str(tmp_path)]) == EXIT_USAGE


def test_data_errors(prepared, tmp_path):
    _, stem, wl = prepared
    assert main(["simulate", "--table", str(tmp_path / "missing"), "--workload", str(wl),
                 "--out", str(tmp_path)]) == EXIT_DATA
    bad = tmp_path / "badwl"
    bad.mkdir()
    for name in ("reps.wl", "train.wl", "test.wl"):
        (bad / name).write_text("0,0,0,0,oops,0.2\n")
    assert main(["simulate", "--table", str(stem), "--workload", str(bad), "--out", str(tmp_path)]) == EXIT_DATA
    assert main(["report", str(wl / "reps.wl")]) == EXIT_DATA


def test_version_and_help_exit_zero(capsys):
    assert main(["--version"]) == 0
    assert main(["simulate", "--help"]) == 0

import csv
import json

import numpy as np
import pytest

from accgraph.cli import main
from accgraph.graph import build_csr, load_edge_list, read_binary


@pytest.fixture
def tri_file(tmp_path):
    p = tmp_path / "tri.txt"
    p.write_text("0 1\n1 2\n0 2\n")
    return p


def test_convert_triangle(tri_file, tmp_path, capsys):
    out = tmp_path / "tri.accx"
    assert main(["convert", str(tri_file), str(out), "--undirected"]) == 0
    assert capsys.readouterr().out.strip() == "V=3 E=6"
    assert read_binary(out).edge_count == 6


def test_convert_reverse_flag(tmp_path):
    src = tmp_path / "w.txt"
    src.write_text("0 1 2.5\n1 2 1\n")
    out = tmp_path / "w.accx"
    main(["convert", str(src), str(out), "--reverse"])
    raw = out.read_bytes()
    flags = int.from_bytes(raw[8:12], "little")
    assert flags & 2 and flags & 1 and flags & 4


def test_convert_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    lines = [f"{a} {b} {w:.3f}" for a, b, w in zip(rng.integers(0, 50, 300), rng.integers(0, 50, 300),
                                                   rng.uniform(1, 9, 300))]
    src = tmp_path / "g.txt"
    src.write_text("\n".join(lines) + "\n")
    out = tmp_path / "g.accx"
    main(["convert", str(src), str(out), "--reverse"])
    direct = build_csr(load_edge_list(src), build_reverse=True)
    assert read_binary(out).structurally_equal(direct)


def test_convert_parse_error(tmp_path, capsys):
    src = tmp_path / "bad.txt"
    src.write_text("0 1\n1 two\n")
    assert main(["convert", str(src), str(tmp_path / "o")]) == 2
    assert "line 2" in capsys.readouterr().err


def test_run_bfs_path_verify(tmp_path, capsys):
    p = tmp_path / "path.txt"
    p.write_text("0 1\n1 2\n2 3\n3 4\n")
    assert main(["run", "bfs", str(p), "--verify"]) == 0
    assert "verify: PASS" in capsys.readouterr().out


def test_run_sssp_zero_weight(tmp_path, capsys):
    p = tmp_path / "z.txt"
    p.write_text("0 1 0\n1 2 3\n")
    assert main(["run", "sssp", str(p)]) == 2
    assert "non-positive weight" in capsys.readouterr().err


def test_run_pagerank_verify_json(tmp_path, capsys):
    g = tmp_path / "u.accx"
    main(["gen", "uniform", str(g), "--vertices", "400", "--edges", "3000", "--reverse", "--seed", "3"])
    capsys.readouterr()
    assert main(["run", "pagerank", str(g), "--verify", "--json", "-"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["verification"]["verdict"] == "PASS"
    assert rep["verification"]["error"] <= 1e-6
    assert rep["graph"] == {"V": 400, "E": 3000}
    assert len(rep["iterations"]) > 0


@pytest.mark.parametrize("algo,extra", [("sssp", ["--weights", "1,10"]), ("kcore", ["--k", "3"]),
                                        ("bp", ["--iterations", "6", "--deterministic"])])
def test_run_verify_other_algorithms(tmp_path, algo, extra):
    g = tmp_path / "g.accx"
    main(["gen", "uniform", str(g), "--vertices", "300", "--edges", "2000", "--undirected"])
    assert main(["run", algo, str(g), "--verify", "--workers", "3", *extra]) == 0


def test_trace_rows_match_iterations(tmp_path, capsys):
    g = tmp_path / "r.accx"
    main(["gen", "rmat", str(g), "--scale", "10", "--edge-factor", "8", "--reverse", "--seed", "1"])
    trace = tmp_path / "t.csv"
    js = tmp_path / "r.json"
    src = str(int(np.argmax(read_binary(g).out_degree)))
    assert main(["run", "bfs", str(g), "--source", src, "--trace", str(trace), "--json", str(js),
                 "--repeat", "3"]) == 0
    rows = list(csv.DictReader(trace.open()))
    rep = json.loads(js.read_text())
    assert len(rows) == len(rep["iterations"])
    assert rep["wall_time"]["runs"] == 3 and rep["wall_time"]["min"] <= rep["wall_time"]["mean"]
    assert set(rows[0]) == {"iteration", "direction", "filter", "small", "medium", "large", "overflow"}


def test_verify_failure_exit_code(tmp_path, monkeypatch, capsys):
    import accgraph.algorithms as alg
    p = tmp_path / "path.txt"
    p.write_text("0 1\n1 2\n")
    monkeypatch.setattr(alg, "bfs_oracle", lambda g, s: np.array([0, 1, 5]))
    assert main(["run", "bfs", str(p), "--verify"]) == 1
    out = capsys.readouterr().out
    assert "FAIL" in out and "first divergent vertex 2" in out


def test_plan_worked_example(capsys):
    assert main(["plan", "--profile", "K40", "--regs", "110", "--strategy", "all", "--iterations", "4"]) == 0
    plan = json.loads(capsys.readouterr().out)
    g = plan["groups"][0]
    assert (g["cta_count"], g["barrier"], plan["launch_count"]) == (60, "completed", 1)


def test_plan_override_deadlocks(capsys):
    main(["plan", "--regs", "110", "--strategy", "all", "--override", "61"])
    plan = json.loads(capsys.readouterr().out)
    assert plan["groups"][0]["barrier"].startswith("deadlocked")
    assert plan["deadlock_free"] is False


def test_plan_from_run_trace(tmp_path, capsys):
    g = tmp_path / "r.accx"
    main(["gen", "rmat", str(g), "--scale", "11", "--edge-factor", "16", "--reverse", "--seed", "2"])
    trace = tmp_path / "t.csv"
    src = str(int(np.argmax(read_binary(g).out_degree)))
    main(["run", "bfs", str(g), "--source", src, "--trace", str(trace)])
    dirs = [r["direction"] for r in csv.DictReader(trace.open())]
    capsys.readouterr()
    main(["plan", "--trace", str(trace), "--strategy", "selective"])
    plan = json.loads(capsys.readouterr().out)
    assert "pull" in dirs
    assert plan["launch_count"] == 1 + sum(a != b for a, b in zip(dirs, dirs[1:]))


def test_plan_zero_occupancy_names_kernel(tmp_path, capsys):
    prof = tmp_path / "p.txt"
    prof.write_text("registers_per_smx=128\nsmx_count=1\n")
    assert main(["plan", "--profile", str(prof), "--strategy", "all"]) == 2
    assert "fused.all" in capsys.readouterr().err

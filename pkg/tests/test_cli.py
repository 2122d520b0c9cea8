import csv
import io
import json
import math

import pytest

from budgex.bench import BenchConfig, rows_to_csv, run_bench
from budgex.cli import main
from budgex.cover import two_coloring
from budgex.graph import load_graph, random_exchange_graph, save_graph


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def tiny_instance(tmp_path, seed=0):
    g = random_exchange_graph(2, 5, 3, seed=seed)
    path = tmp_path / "g.json"
    save_graph(g, path)
    return path


def test_generate_manhattan_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        code, _, _ = run(capsys, "generate", "manhattan", "--robots", 5, "--seed", 3, "--steps", 40, "--out", d)
        assert code == 0
    for name in ("graph.json", "posegraph.g2o"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_generate_random_bipartite_into_missing_dir(tmp_path, capsys):
    out = tmp_path / "deep" / "er"
    code, text, _ = run(capsys, "generate", "random", "--robots", 2, "--verts", 6, "--seed", 1, "--out", out)
    assert code == 0
    g = load_graph(out / "graph.json")
    assert g.n_robots == 2
    assert two_coloring(g, g.all_edges()) is not None
    assert json.loads(text)["vertices"] == 12


def test_malformed_graph_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = run(capsys, "plan", "--graph", bad, "--budget", 2)
    assert code == 1
    assert "error" in err
    code, _, _ = run(capsys, "plan", "--graph", tmp_path / "missing.json", "--budget", 2)
    assert code == 1


def test_plan_zero_budget(tmp_path, capsys):
    path = tiny_instance(tmp_path)
    code, text, _ = run(capsys, "plan", "--graph", path, "--budget", 0)
    assert code == 0
    out = json.loads(text)
    assert out["vertices"] == [] and out["edges"] == [] and out["value"] == 0.0


def test_plan_trace_and_certify_oracle(tmp_path, capsys):
    path = tiny_instance(tmp_path, seed=3)
    trace = tmp_path / "trace.csv"
    code, text, _ = run(capsys, "plan", "--graph", path, "--budget", 2, "--trace", trace)
    assert code == 0
    planned = json.loads(text)
    assert trace.read_text().startswith("round,vertex,gain,cost,value\n")
    code, text, _ = run(capsys, "certify", "--graph", path, "--budget", 2, "--method", "oracle")
    assert code == 0
    cert = json.loads(text)
    assert cert["achieved"] == pytest.approx(planned["value"])
    assert 1 - 1 / math.e - 1e-9 <= cert["ratio"] <= 1 + 1e-12


def test_cover_command(tmp_path, capsys, toy):
    path = tmp_path / "toy.json"
    save_graph(toy, path)
    code, text, _ = run(capsys, "cover", "--graph", path)
    assert code == 0
    assert json.loads(text)["value"] == 3
    edges = tmp_path / "edges.json"
    edges.write_text("[0, 1]")
    code, text, _ = run(capsys, "cover", "--graph", path, "--edges", edges)
    assert json.loads(text)["value"] == 2
    edges.write_text("[99]")
    code, _, _ = run(capsys, "cover", "--graph", path, "--edges", edges)
    assert code == 1


def test_wst_plan_needs_posegraph(tmp_path, capsys):
    path = tiny_instance(tmp_path)
    code, _, err = run(capsys, "plan", "--graph", path, "--budget", 2, "--objective", "wst")
    assert code == 1
    assert "pose graph" in err


def test_plan_with_generated_posegraph(tmp_path, capsys):
    run(capsys, "generate", "manhattan", "--robots", 3, "--steps", 30, "--grid", 6, "--seed", 2, "--out", tmp_path)
    code, text, _ = run(capsys, "plan", "--graph", tmp_path / "graph.json", "--posegraph",
                        tmp_path / "posegraph.g2o", "--objective", "wst", "--budget", 5)
    assert code == 0
    out = json.loads(text)
    assert 0 < out["normalized"] <= 1
    code, text, _ = run(capsys, "certify", "--graph", tmp_path / "graph.json", "--posegraph",
                        tmp_path / "posegraph.g2o", "--objective", "wst", "--budget", 5,
                        "--method", "fw", "--iters", 20)
    assert code == 0
    cert = json.loads(text)
    assert cert["achieved"] <= cert["upper_bound"] + 1e-7


def bench_args(out, *extra):
    return ["bench", "--source", "random", "--objective", "nlc", "--algos", "greedy,edge,random",
            "--budgets", "0,3,100", "--degrees", "2,4", "--seeds", "0,1", "--random-trials", 3,
            "--bound", "lp", "--out", out, *extra]


def test_bench_byte_identical(tmp_path, capsys, monkeypatch):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(capsys, *bench_args(a))[0] == 0
    monkeypatch.setenv("BUDGEX_THREADS", "4")
    assert run(capsys, *bench_args(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_bench_rows(tmp_path, capsys):
    out = tmp_path / "sub" / "rows.csv"
    run(capsys, *bench_args(out))
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert list(rows[0]) == ["algo", "objective", "budget", "max_degree", "seed", "value",
                             "normalized", "upper_bound", "runtime_ms"]
    # 2 degrees x 2 seeds x 3 budgets x (1 + 1 + 3 trials)
    assert len(rows) == 2 * 2 * 3 * 5
    for r in rows:
        assert float(r["value"]) <= float(r["upper_bound"]) + 1e-7
        assert r["runtime_ms"] == ""
        if float(r["budget"]) == 0:
            assert float(r["normalized"]) == 0.0
        if float(r["budget"]) == 100 and r["algo"] == "greedy":
            assert float(r["normalized"]) == pytest.approx(1.0)


def test_bench_timing_and_config(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"source": "random", "objective": "nlc", "algos": ["greedy"],
                               "budgets": [2], "seeds": [5], "n_robots": 3, "verts_per_robot": 4}))
    out = tmp_path / "rows.csv"
    code, _, _ = run(capsys, "bench", "--config", cfg, "--timing", "--out", out)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert len(rows) == 1 and float(rows[0]["runtime_ms"]) >= 0
    cfg.write_text(json.dumps({"budgets": []}))
    assert run(capsys, "bench", "--config", cfg)[0] == 1
    cfg.write_text(json.dumps({"bogus": 1}))
    assert run(capsys, "bench", "--config", cfg)[0] == 1


def test_bench_failed_row_recorded(tmp_path):
    g = random_exchange_graph(2, 4, 3, seed=0)
    path = tmp_path / "g.json"
    save_graph(g, path)
    cfg = BenchConfig(source="file", graph_path=str(path), objective="nlc", algos=["greedy", "nope"],
                      budgets=[2], random_trials=1)
    rows = run_bench(cfg, workers=1)
    assert rows[0]["value"] > 0
    assert math.isnan(rows[1]["value"])
    assert "nan" in rows_to_csv(rows)

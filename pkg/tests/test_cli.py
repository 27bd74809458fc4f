import json

import pytest

from treepack.cli import main
from treepack.graph import HostGraph, write_edge_list
from treepack.trees import generate_family, write_family


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_pack_generated_family(tmp_path, capsys):
    out, rep, man = tmp_path / "p.json", tmp_path / "m.json", tmp_path / "manifest.json"
    code, _, err = run(["pack", "--generate", "random:n=80,count=10", "--n", "80", "--epsilon", "1.0",
                        "--delta", "3", "--rounds", "4", "--seed", "2", "--threads", "1",
                        "--out", str(out), "--report", str(rep), "--manifest", str(man)], capsys)
    assert code == 0, err
    doc = json.loads(out.read_text())
    assert doc["certificate"]["verdict"] == "valid" and len(doc["trees"]) == 10
    manifest = json.loads(man.read_text())
    assert manifest["input_hash"] == doc["input_hash"] == json.loads(rep.read_text())["input_hash"]
    assert "pack_seconds" in manifest["timings"]


def test_pack_is_byte_identical(tmp_path, capsys):
    args = ["pack", "--generate", "random:n=80,count=10", "--n", "80", "--epsilon", "1.0",
            "--delta", "3", "--rounds", "4", "--seed", "5"]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(args + ["--out", str(a), "--threads", "1"], capsys)[0] == 0
    assert run(args + ["--out", str(b), "--threads", "1"], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_pack_from_file(tmp_path, capsys):
    fam = generate_family("ringel:n=14", seed=0)
    write_family(fam, tmp_path / "f.jsonl")
    code, out, _ = run(["pack", "--trees", str(tmp_path / "f.jsonl"), "--n", "29", "--epsilon", "1.5",
                        "--delta", "2", "--rounds", "2"], capsys)
    assert code == 0 and json.loads(out)["certificate"]["verdict"] == "valid"


@pytest.mark.xfail(strict=True, reason="spanning-path decomposition of K_60 starves the reserve "
                                       "at this order; see README")
def test_pack_full_path_budget(capsys):
    code, _, _ = run(["pack", "--generate", "paths:n=60,budget=full", "--n", "60", "--epsilon", "0.5",
                      "--delta", "2", "--seed", "7", "--threads", "1"], capsys)
    assert code == 0


def test_full_path_budget_reports_retryable_failure(capsys):
    code, out, err = run(["pack", "--generate", "paths:n=60,budget=full", "--n", "60", "--epsilon",
                          "0.5", "--delta", "2", "--seed", "7", "--retries", "1", "--threads", "1"],
                         capsys)
    assert code == 2
    doc = json.loads(out)
    assert doc["status"] == "failure" and doc["retryable"] and len(doc["attempts"]) == 2


def test_paper_faithful_prints_n0(capsys):
    code, _, err = run(["pack", "--generate", "random:n=60,count=3", "--paper-faithful", "--n", "60",
                        "--epsilon", "0.1", "--delta", "3"], capsys)
    assert code == 1 and "n_0 >= 10^" in err


def test_missing_input(capsys):
    assert run(["pack", "--n", "60", "--epsilon", "0.5", "--delta", "2"], capsys)[0] == 1


def test_conflicting_input(tmp_path, capsys):
    code, _, err = run(["pack", "--trees", "x", "--generate", "paths:n=10", "--n", "10",
                        "--epsilon", "0.5", "--delta", "2"], capsys)
    assert code == 1 and "exactly one" in err


def test_malformed_family_file(tmp_path, capsys):
    (tmp_path / "bad.jsonl").write_text("{not json\n")
    code, _, _ = run(["pack", "--trees", str(tmp_path / "bad.jsonl"), "--n", "10", "--epsilon", "0.5",
                      "--delta", "2"], capsys)
    assert code == 1


def test_bad_numeric_flag(capsys):
    assert run(["pack", "--generate", "paths:n=10", "--n", "10", "--epsilon", "-1", "--delta", "2"],
               capsys)[0] == 1
    assert run(["pack", "--n", "ten"], capsys)[0] == 1


def test_star_family_capacity_exit_code(tmp_path, capsys):
    from treepack.trees import generate_counterexample_family

    fam = generate_counterexample_family("star_family", n=400, epsilon=9e-4)
    write_family(fam, tmp_path / "stars.jsonl")
    code, out, _ = run(["pack", "--trees", str(tmp_path / "stars.jsonl"), "--n", "400",
                        "--epsilon", "0.0009", "--delta", str(fam.delta)], capsys)
    assert code == 1 and json.loads(out)["stage"] == "capacity"


def test_threads_env_fallback(monkeypatch):
    from treepack.cli import _threads
    from treepack.errors import InputError

    monkeypatch.setenv("TREEPACK_THREADS", "3")
    assert _threads(None) == 3 and _threads(2) == 2
    monkeypatch.setenv("TREEPACK_THREADS", "many")
    with pytest.raises(InputError):
        _threads(None)


# -- diagnose -------------------------------------------------------------------------

def test_diagnose_complete_graph(tmp_path, capsys):
    write_edge_list(HostGraph.complete(10), tmp_path / "k10.txt")
    code, out, _ = run(["diagnose", "--graph", str(tmp_path / "k10.txt"), "--gamma", "0.5",
                        "--delta", "2", "--exact"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["defect"]["max_abs_defect"] == 0 and doc["bad_profile"]["bad_vertex_set"] == []


def test_diagnose_bipartite(tmp_path, capsys):
    g = HostGraph.from_edges(10, [(u, 5 + v) for u in range(5) for v in range(5)])
    write_edge_list(g, tmp_path / "k55.txt")
    code, out, _ = run(["diagnose", "--graph", str(tmp_path / "k55.txt"), "--gamma", "0.5",
                        "--delta", "2", "--exact"], capsys)
    d = json.loads(out)["defect"]
    assert code == 0 and d["max_abs_defect"] == pytest.approx(0.0556, abs=1e-4)
    assert sorted(d["worst_subset"]) in ([0, 1, 2, 3, 4], [5, 6, 7, 8, 9])


def test_diagnose_exact_over_limit(tmp_path, capsys):
    write_edge_list(HostGraph.complete(25), tmp_path / "k25.txt")
    code, _, err = run(["diagnose", "--graph", str(tmp_path / "k25.txt"), "--gamma", "0.5",
                        "--delta", "2", "--exact"], capsys)
    assert code == 1 and "m <= 20" in err


def test_diagnose_lemma_suite(capsys):
    code, out, _ = run(["diagnose", "--lemma-suite", "--seed", "1", "--trials", "20000"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["edge_K10"]["all_pass"] and doc["path10_K100"]["all_pass"]


def test_module_entry_point():
    import subprocess
    import sys

    r = subprocess.run([sys.executable, "-m", "treepack", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "treepack" in r.stdout

import json

import pytest

from qsl.bench import benchmark_decomposition, grover_iteration
from qsl.circuit import Circuit, diffusor, h, oracle_gate
from qsl.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_tree_commands(tmp_path, capsys):
    code, out, _ = run(capsys, "tree", "beta", "--schedule", "4,3")
    assert code == 0 and json.loads(out)["beta"][1] == pytest.approx(0.6875)
    path = tmp_path / "d.json"
    code, _, _ = run(capsys, "tree", "build", "--schedule", "2,2", "--marked", "0101", "--out", path)
    assert code == 0 and Circuit.from_json(path.read_text()).oracle_calls == 3
    code, out, _ = run(capsys, "tree", "search", "--n", "8", "--marked", "01001101", "--epsilon", "0.5")
    assert json.loads(out)["element"] == "01001101"


def test_tree_bad_marked_length(capsys):
    code, _, err = run(capsys, "tree", "build", "--schedule", "2,2", "--marked", "010")
    assert code == 2 and "error" in err


def test_uncompute_commands(tmp_path, capsys):
    src = tmp_path / "o.json"
    src.write_text(benchmark_decomposition(5).oracle_circuit().to_json())
    out_path = tmp_path / "vt.json"
    code, out, _ = run(capsys, "uncompute", "rewrite", "--circuit", src, "--split", "3,1",
                       "--n-data", "4", "--schedule", "wm:2,2", "--out", out_path)
    assert code == 0 and json.loads(out)["measured_total"] == json.loads(out)["total"]
    assert Circuit.from_json(out_path.read_text()).n_qubits == 5
    cnf = tmp_path / "f.cnf"
    cnf.write_text("p cnf 3 2\n1 -2 0\n2 3 0\n")
    code, out, _ = run(capsys, "uncompute", "stats", "--cnf", cnf, "--schedule", "sets:0,1/2")
    assert code == 0 and json.loads(out)["ell"] == 2


def test_multipoint_run(tmp_path, capsys):
    f = tmp_path / "s.txt"
    f.write_text("000111\n101010\n")
    code, out, _ = run(capsys, "multipoint", "run", "--n", 6, "--marked-file", f, "--p", 0.5,
                       "--k", 2, "--seed", 7, "--trials", 20)
    rep = json.loads(out)
    assert code == 0 and set(rep) >= {"success_rate", "mean_queries", "mean_gates"}


def test_topo_transpile(tmp_path, capsys):
    c = tmp_path / "g.json"
    c.write_text(grover_iteration(6).to_json())
    code, out, _ = run(capsys, "topo", "transpile", "--circuit", c, "--graph", "vigo",
                       "--layout", "0,2,3,4", "--ancillas", "4", "--out", tmp_path / "p.json")
    rep = json.loads(out)
    assert code == 0 and rep["cnot_count"] <= 32 and rep["max_deviation"] < 1e-9


def test_bench_run_all_oracles(tmp_path, capsys):
    c = Circuit(4, tuple(h(q) for q in range(4)) + (oracle_gate(range(4), {3}),) + diffusor(4).gates)
    path = tmp_path / "c.json"
    path.write_text(c.to_json())
    code, out, _ = run(capsys, "bench", "run", "--circuit", path, "--shots", 64, "--seed", 1,
                       "--noise", "f=1,a=1", "--all-oracles")
    lines = out.strip().splitlines()
    assert code == 0 and lines[0] == "offset,count,expected" and len(lines) == 17
    assert float(lines[1].split(",")[2]) == pytest.approx(16 * 64 * 484 / 1024)


def test_bench_figures(tmp_path, capsys):
    code, out, _ = run(capsys, "bench", "figures", "--out", tmp_path, "--shots", 16)
    assert code == 0 and "grover_iteration" in json.loads(out)

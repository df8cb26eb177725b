import json

import numpy as np
import pytest

from ossqp.cli import run_command
from ossqp.problem import LcqoProblem, PrimalDualPoint, dump_problem

TOY = "+1 1:1 2:2\n+1 1:2 2:0.5\n-1 1:-1 2:-1.5\n-1 1:-2 2:0.3\n+1 1:0.2 2:-0.1\n"


@pytest.fixture
def problem_file(tmp_path):
    path = tmp_path / "p.json"
    assert run_command(["gen", "--m", "3", "--n", "8", "--seed", "7", "-o", str(path)]) == 0
    return path


def test_gen_then_solve(problem_file, tmp_path, capsys):
    out = tmp_path / "sol.json"
    assert run_command(["solve", str(problem_file), "-o", str(out), "--json"]) == 0
    summary = json.loads(capsys.readouterr().out)
    sol = json.loads(out.read_text())
    assert summary["status"] == sol["status"] == "Optimal"
    x, s = np.array(sol["x"]), np.array(sol["s"])
    assert x @ s <= 8 * 1e-6 * (1 + 1e-9)
    assert sol["gap"] <= 8 * 1e-6


def test_solve_human_table(problem_file, capsys):
    assert run_command(["solve", str(problem_file)]) == 0
    out = capsys.readouterr().out
    assert "status" in out and "Optimal" in out


def test_missing_file():
    assert run_command(["solve", "does-not-exist.json"]) == 74


@pytest.mark.parametrize(
    "argv",
    [[], ["frobnicate"], ["solve"], ["gen", "--m", "3"], ["solve", "p.json", "--backend", "quantum"]],
)
def test_usage_errors(argv, capsys):
    assert run_command(argv) == 64
    assert "usage" in capsys.readouterr().err


def test_out_of_range_config(problem_file):
    assert run_command(["solve", str(problem_file), "--beta", "3"]) == 64
    assert run_command(["solve", str(problem_file), "--theta", "0.99"]) == 64


def test_iteration_limit(problem_file):
    assert run_command(["solve", str(problem_file), "--max-iters", "2"]) == 2


def test_malformed_problem(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert run_command(["solve", str(path)]) == 1


def test_missing_start(tmp_path):
    path = tmp_path / "p.json"
    dump_problem(path, LcqoProblem.from_dense([[1, 1]], [2], [0, 0]))
    assert run_command(["solve", str(path)]) == 64


def test_explicit_start_and_centering(tmp_path, capsys):
    path = tmp_path / "p.json"
    dump_problem(path, LcqoProblem.from_dense([[1, 1, 1]], [3], [1, 2, 3]))
    start = tmp_path / "start.json"
    x0 = [0.5, 1.0, 1.5]
    s0 = [1.0, 2.0, 3.0]
    start.write_text(json.dumps(PrimalDualPoint(np.array(x0), np.zeros(1), np.array(s0)).to_json_dict()))
    assert run_command(["solve", str(path), "--start", str(start), "--json"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["centered"] is True


def test_zero_columns_are_split(tmp_path, capsys):
    # Column 1 of A is zero and gets split by preprocessing.
    A = [[1.0, 0.0, 1.0], [0.0, 0.0, 1.0]]
    p = LcqoProblem.from_dense(A, [2.0, 1.0], [1.0, 1.0, 1.0])
    path = tmp_path / "p.json"
    dump_problem(path, p, PrimalDualPoint(np.ones(3), np.zeros(2), np.ones(3)))
    out = tmp_path / "sol.json"
    assert run_command(["solve", str(path), "-o", str(out), "--json"]) == 0
    sol = json.loads(out.read_text())
    assert len(sol["x"]) == 3 and sol["split_columns"]
    x = np.array(sol["x"])
    assert np.allclose(np.array(A) @ x, [2.0, 1.0], atol=1e-9)


def test_determinism(problem_file, tmp_path):
    files = []
    for tag in "ab":
        sol, trace = tmp_path / f"s{tag}.json", tmp_path / f"t{tag}.jsonl"
        argv = ["solve", str(problem_file), "--backend", "noisy", "--seed", "3", "-o", str(sol), "--trace", str(trace)]
        assert run_command(argv) == 0
        files.append((sol.read_bytes(), trace.read_bytes()))
    assert files[0] == files[1]
    assert b"wall_time" not in files[0][1]


def test_estimate(problem_file, tmp_path, capsys):
    trace = tmp_path / "t.jsonl"
    assert run_command(["solve", str(problem_file), "--trace", str(trace), "--trace-kappa"]) == 0
    report = tmp_path / "r.json"
    capsys.readouterr()
    assert run_command(["estimate", str(problem_file), str(trace), "-o", str(report)]) == 0
    d = json.loads(report.read_text())
    n_lines = len(trace.read_text().splitlines())
    assert d["totals"]["iterations"] == len(d["rows"]) == n_lines
    assert "kappa" in capsys.readouterr().out


def test_estimate_flags_violation(problem_file, tmp_path, capsys):
    trace = tmp_path / "t.jsonl"
    assert run_command(["solve", str(problem_file), "--trace", str(trace), "--max-iters", "3"]) == 2
    lines = [json.loads(l) for l in trace.read_text().splitlines()]
    lines[1]["omega"] = 5 * lines[1]["frob_M"]
    trace.write_text("".join(json.dumps(l) + "\n" for l in lines))
    assert run_command(["estimate", str(problem_file), str(trace)]) == 1
    assert "invariant violated" in capsys.readouterr().err


def test_svm_train_and_predict(tmp_path, capsys):
    data = tmp_path / "d.libsvm"
    data.write_text(TOY)
    model = tmp_path / "m.json"
    assert run_command(["svm-train", str(data), "--C", "1", "-o", str(model)]) == 0
    out = capsys.readouterr().out
    assert "eps_reg" in out
    assert set(json.loads(model.read_text())) == {"w", "t", "C", "objective"}
    preds = tmp_path / "pred.txt"
    assert run_command(["svm-predict", str(model), str(data), "-o", str(preds)]) == 0
    assert "accuracy" in capsys.readouterr().out
    assert preds.read_text().split() == ["+1", "+1", "-1", "-1", "+1"]


def test_svm_bad_label(tmp_path):
    data = tmp_path / "d.libsvm"
    data.write_text("3 1:1\n")
    assert run_command(["svm-train", str(data), "-o", str(tmp_path / "m.json")]) == 1


def test_plots(problem_file, tmp_path):
    trace, fig = tmp_path / "t.jsonl", tmp_path / "solve.png"
    assert run_command(["solve", str(problem_file), "--trace", str(trace), "--plot", str(fig)]) == 0
    assert fig.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    cost_fig = tmp_path / "cost.png"
    assert run_command(["estimate", str(problem_file), str(trace), "--plot", str(cost_fig)]) == 0
    assert cost_fig.stat().st_size > 1000

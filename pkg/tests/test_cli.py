import json
import subprocess
import sys

import pytest

from robustkit.cli import main
from robustkit.counterparts import cc_counterpart
from robustkit.model import problem_from_dict
from robustkit.solver import from_lp_text, solve

FINITE = {"name": "f", "sense": "min", "variables": [{"name": "x", "lb": 1, "ub": 2}],
          "objective": {"coeffs": {"x": 1}}, "constraints": [],
          "uncertainty": {"type": "finite", "scenarios": [{"name": "a"}, {"name": "b", "objective": {"x": 2}}]}}

LIGHT = {"name": "l", "sense": "min", "variables": [{"name": "x"}], "objective": {"coeffs": {"x": 1}},
         "constraints": [{"name": "c", "coeffs": {"x": 1}, "sense": ">=", "rhs": 1}],
         "uncertainty": {"type": "finite", "scenarios": [{"name": "nom"}, {"name": "hi", "rhs": {"c": 2}}]}}

BUDGET = {"name": "b", "sense": "max", "variables": [{"name": "x"}, {"name": "y", "ub": 2}],
          "objective": {"coeffs": {"x": 1, "y": 1}},
          "constraints": [{"name": "c", "coeffs": {"x": 1, "y": 1}, "deviations": {"x": 0.5, "y": 1},
                           "sense": "<=", "rhs": 3}],
          "uncertainty": {"type": "budget", "gamma": 1}}

INFEASIBLE = {"name": "i", "sense": "min", "variables": [{"name": "x"}], "objective": {"coeffs": {"x": 1}},
              "constraints": [{"name": "c", "coeffs": {"x": 1}, "sense": "<=", "rhs": -1}],
              "uncertainty": {"type": "finite", "scenarios": [{"name": "only"}]}}

PARALLEL = {"nodes": 2, "source": 0, "target": 1,
            "arcs": [{"from": 0, "to": 1, "lower": 1, "upper": 3}, {"from": 0, "to": 1, "lower": 2, "upper": 2}]}

KNAPSACK = {"capacity": 7, "gamma": 1,
            "items": [{"profit": 10, "weight": 4, "deviation": 2}, {"profit": 8, "weight": 3, "deviation": 1},
                      {"profit": 5, "weight": 2, "deviation": 2}]}


@pytest.fixture
def files(tmp_path):
    out = {}
    for name, doc in [("finite", FINITE), ("light", LIGHT), ("budget", BUDGET), ("infeasible", INFEASIBLE),
                      ("graph", PARALLEL), ("knapsack", KNAPSACK)]:
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(doc))
        out[name] = str(path)
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "name": "x",\n  "sense": }')
    out["bad"] = str(bad)
    out["dir"] = tmp_path
    return out


def run(argv, capsys):
    code = main([str(a) for a in argv])
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def test_transform_writes_model_and_metadata(files, capsys):
    out = files["dir"] / "out"
    code, _, _ = run(["transform", "--concept", "strict", files["finite"], "-o", out], capsys)
    assert code == 0
    meta = json.loads((out / "meta.json").read_text())
    assert meta["concept"] == "strict" and meta["scenario_count"] == 2
    model = from_lp_text((out / "model.lp").read_text())
    assert solve(model).objective == pytest.approx(2)


def test_transform_budget_as_strict_is_unsupported(files, capsys):
    code, _, err = run(["transform", "--concept", "strict", files["budget"], "-o", files["dir"] / "o"], capsys)
    assert code == 3 and "--concept cc" in err


def test_malformed_json_reports_position(files, capsys):
    code, _, err = run(["transform", "--concept", "strict", files["bad"]], capsys)
    assert code == 1 and "3" in err and "12" in err


def test_solve_cc_matches_counterpart(files, capsys):
    code, out, _ = run(["solve", "--concept", "cc", files["budget"]], capsys)
    doc = json.loads(out)
    assert code == 0
    assert set(doc) == {"status", "objective", "assignment", "counters", "concept", "seed", "info"}
    assert doc["objective"] == pytest.approx(cc_counterpart(problem_from_dict(BUDGET)).solve().objective)
    assert doc["seed"] == 0 and doc["concept"] == "cc"


def test_solve_regret_path(files, capsys):
    for strategy in ("worst-case-branching", "midpoint-branching"):
        code, out, _ = run(["solve", "--concept", "regret-path-bb", "--strategy", strategy, files["graph"]], capsys)
        assert code == 0 and json.loads(out)["objective"] == 1
    code, out, _ = run(["solve", "--concept", "midpoint-path", files["graph"]], capsys)
    assert json.loads(out)["objective"] == 1


def test_solve_knapsack(files, capsys):
    code, out, _ = run(["solve", "--concept", "knapsack-dp", files["knapsack"]], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["objective"] == 13 and doc["assignment"] == {"chosen": [1, 2]}


def test_sampling_output_is_reproducible(files, capsys):
    argv = ["solve", "--concept", "sampling", "--samples", "50", "--seed", "7", "--epsilon", "0.1", files["budget"]]
    first = files["dir"] / "s1.json"
    second = files["dir"] / "s2.json"
    assert run(argv + ["-o", first], capsys)[0] == 0
    assert run(argv + ["-o", second, "--threads", "4"], capsys)[0] == 0
    assert first.read_bytes() == second.read_bytes()
    assert json.loads(first.read_text())["seed"] == 7


def test_solve_infeasible_exit(files, capsys):
    code, out, _ = run(["solve", "--concept", "strict", files["infeasible"]], capsys)
    assert code == 2 and json.loads(out)["status"] == "infeasible"


def test_solve_limit_exit(files, capsys):
    path = files["dir"] / "interval.json"
    path.write_text(json.dumps({**BUDGET, "uncertainty": {"type": "interval"}}))
    code, out, err = run(["solve", "--concept", "cutting-plane", "--max-iters", "1", path], capsys)
    assert code == 4 and "ITER_LIMIT" in err
    assert json.loads(out)["status"] == "iteration-limit"


def test_cut_log_file(files, capsys):
    path = files["dir"] / "interval.json"
    path.write_text(json.dumps({**BUDGET, "uncertainty": {"type": "interval"}}))
    log = files["dir"] / "cuts.jsonl"
    code, _, _ = run(["solve", "--concept", "cutting-plane", "--cut-log", log, path], capsys)
    lines = [json.loads(x) for x in log.read_text().splitlines()]
    assert code == 0 and lines[0]["iter"] == 1 and lines[-1]["scenario_name"] is None


def test_solve_lp_text(files, capsys):
    out = files["dir"] / "t"
    run(["transform", "--concept", "cc", files["budget"], "-o", out], capsys)
    code, text, _ = run(["solve", out / "model.lp"], capsys)
    assert code == 0 and json.loads(text)["concept"] == "lp"


@pytest.mark.parametrize("concept, extra, doc", [
    ("strict", [], "finite"),
    ("cc", [], "budget"),
    ("light", ["--weights", '{"c": 1}', "--rho", "1"], "light"),
    ("regret-finite", [], "finite"),
])
def test_transform_then_solve_agrees(files, capsys, concept, extra, doc):
    out = files["dir"] / concept
    assert run(["transform", "--concept", concept, files[doc], "-o", out] + extra, capsys)[0] == 0
    _, text, _ = run(["solve", "--concept", concept, files[doc]] + extra, capsys)
    direct = json.loads(text)["objective"]
    assert solve(from_lp_text((out / "model.lp").read_text())).objective == pytest.approx(direct, abs=1e-9)


def test_compare_two_rows(files, capsys):
    code, out, _ = run(["compare", "--concepts", "strict,light", "--weights", '{"c": 1}', files["light"]], capsys)
    lines = out.strip().splitlines()
    assert code == 0 and len(lines) == 3
    assert [ln.split(",")[0] for ln in lines[1:]] == ["strict", "light"]


def test_compare_partial_failure(files, capsys):
    code, out, err = run(["compare", "--concepts", "regret-finite,cc,strict", "--format", "json", files["finite"]],
                         capsys)
    rows = json.loads(out)["rows"]
    assert code == 0
    assert [r["concept"] for r in rows] == ["strict", "cc", "regret-finite"]
    assert [r["status"] for r in rows].count("FAILED") == 1 and "cc: FAILED" in err


def test_compare_all_failed(files, capsys):
    code, _, _ = run(["compare", "--concepts", "cc,regret-dual", files["finite"]], capsys)
    assert code == 1


def test_compare_needs_two_concepts(files, capsys):
    assert run(["compare", "--concepts", "strict", files["finite"]], capsys)[0] == 1


def test_evaluate_solution_file(files, capsys):
    sol = files["dir"] / "sol.json"
    run(["solve", "--concept", "strict", files["light"], "-o", sol], capsys)
    code, out, _ = run(["evaluate", "--solution", sol, files["light"]], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["violated_count"] == 0 and doc["worst_case"] == pytest.approx(2)
    plain = files["dir"] / "plain.json"
    plain.write_text('{"x": 1}')
    doc = json.loads(run(["evaluate", "--solution", plain, files["light"]], capsys)[1])
    assert doc["violated_count"] == 1 and doc["max_violation"] == pytest.approx(1)


def test_bound_commands(capsys):
    code, out, _ = run(["bound", "--n", "1", "--samples", "10", "--epsilon", "0.2"], capsys)
    assert code == 0 and json.loads(out)["bound"] == pytest.approx(0.8 ** 10)
    code, out, _ = run(["bound", "--n", "1", "--epsilon", "0.2", "--beta", "0.11"], capsys)
    assert code == 0 and json.loads(out)["required_samples"] == 10
    assert run(["bound", "--n", "0", "--samples", "10", "--epsilon", "0.2"], capsys)[0] == 1
    assert run(["bound", "--n", "1", "--samples", "10", "--epsilon", "1.5"], capsys)[0] == 1
    assert run(["bound", "--n", "1", "--epsilon", "0.2"], capsys)[0] == 1


def test_usage_errors_exit_one(files, capsys):
    assert run([], capsys)[0] == 1
    assert run(["solve", "--concept", "voodoo", files["finite"]], capsys)[0] == 1
    assert run(["solve", "--concept", "strict", files["dir"] / "missing.json"], capsys)[0] == 1
    assert run(["solve", "--concept", "strict", "--feas-tol", "-1", files["finite"]], capsys)[0] == 1


def test_regret_dual_requires_flag(files, capsys):
    doc = {"name": "r", "sense": "min",
           "variables": [{"name": "a", "ub": 1, "integer": True}, {"name": "b", "ub": 1, "integer": True}],
           "objective": {"coeffs": {"a": 1, "b": 2}, "deviations": {"a": 2}},
           "constraints": [{"name": "c", "coeffs": {"a": 1, "b": 1}, "sense": ">=", "rhs": 1}],
           "uncertainty": {"type": "interval"}}
    path = files["dir"] / "rd.json"
    path.write_text(json.dumps(doc))
    assert run(["solve", "--concept", "regret-dual", path], capsys)[0] == 3
    code, out, _ = run(["solve", "--concept", "regret-dual", "--assume-integral", path], capsys)
    assert code == 0 and json.loads(out)["objective"] == pytest.approx(1)


def test_module_entry_point(files):
    proc = subprocess.run([sys.executable, "-m", "robustkit", "bound", "--n", "2", "--samples", "30",
                           "--epsilon", "0.1"], capture_output=True, text=True)
    assert proc.returncode == 0 and "bound" in json.loads(proc.stdout)

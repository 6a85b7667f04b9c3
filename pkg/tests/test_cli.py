import json
import subprocess
import sys
from pathlib import Path

import jsonschema
import pytest

from causalkit.cli import main, run
from helpers import FIXTURES

SCHEMA = json.loads((Path(__file__).parents[1] / "docs" / "cli-result.schema.json").read_text())
MATRIX = json.loads((FIXTURES / "exit_matrix.json").read_text())


@pytest.fixture(autouse=True)
def _in_fixtures(monkeypatch):
    monkeypatch.chdir(FIXTURES)
    monkeypatch.delenv("CAUSALKIT_TOL", raising=False)


@pytest.mark.parametrize("row", MATRIX, ids=lambda r: " ".join(r["args"]))
def test_exit_matrix(row):
    res = run(row["args"])
    assert res.exit_code == row["exit"], res.diagnostics
    jsonschema.validate(json.loads(res.to_json()), SCHEMA)


@pytest.mark.parametrize("row", MATRIX, ids=lambda r: " ".join(r["args"]))
def test_json_byte_identical(row):
    args = row["args"] + ["--format", "json"]
    first = run(args).render()
    assert first == run(args).render()
    json.loads(first)


def test_exit_matrix_covers_every_command():
    commands = {r["args"][0] for r in MATRIX}
    assert commands >= {"parse", "eval", "check-terminal", "check-nonsig", "diamond-witness",
                        "bang", "audit-theorem2", "lhv", "behavior-ns"}
    assert {r["exit"] for r in MATRIX} == {0, 1, 2}


def test_swap_signals():
    res = run(["check-nonsig", "--file", "swap.proc", "swapAB"])
    assert res.exit_code == 1 and res.verdict is False
    assert res.residual > 0.1


def test_diamond_witness_emits_h():
    res = run(["diamond-witness", "--file", "diamond.proc", "N", "--seed", "11", "--format", "json"])
    assert res.exit_code == 0
    assert res.witness["repr"] == "matrix"
    rows, cols = res.witness["rows"], res.witness["cols"]
    # h is a stochastic map: every column sums to one (data is row-major)
    data = res.witness["data"]
    for j in range(cols):
        assert abs(sum(data[i * cols + j] for i in range(rows)) - 1) <= 1e-9
    assert res.residual <= 1e-9


def test_seed_changes_witness_deterministically():
    a = run(["diamond-witness", "--file", "diamond.proc", "N", "--seed", "11"]).witness
    b = run(["diamond-witness", "--file", "diamond.proc", "N", "--seed", "11"]).witness
    c = run(["diamond-witness", "--file", "diamond.proc", "N", "--seed", "12"]).witness
    assert a == b and a != c


def test_lhv_pr_box():
    res = run(["lhv", "--file", "pr.behavior"])
    assert res.exit_code == 1
    assert abs(res.details["margin"] - 1.25) <= 1e-6


def test_bang_counterexample():
    res = run(["bang", "--file", "substochastic.proc"])
    assert res.exit_code == 1
    assert abs(res.details["scalar"] - 0.5) <= 1e-12
    assert res.details["counterexample"] == "s ; g ; discard(A)"


def test_audit_notes():
    res = run(["audit-theorem2", "--file", "substochastic.proc"])
    assert res.exit_code == 0
    assert "(!) violated, scalar 0.5 at g" in res.diagnostics


def test_text_format_residual():
    out = run(["check-nonsig", "--file", "swap.proc", "swapAB"]).render()
    line = next(l for l in out.splitlines() if l.startswith("residual: "))
    value = line.split(": ")[1]
    assert "e" in value and len(value.split("e")[0]) == 4  # d.dd
    assert out.endswith("exit: 1\n")


def test_tol_from_environment(monkeypatch):
    monkeypatch.setenv("CAUSALKIT_TOL", "10")
    res = run(["check-nonsig", "--file", "swap.proc", "swapAB"])
    assert res.exit_code == 0
    monkeypatch.setenv("CAUSALKIT_TOL", "nonsense")
    assert run(["check-nonsig", "--file", "swap.proc", "swapAB"]).exit_code == 2


def test_tol_flag_must_be_positive():
    assert run(["check-nonsig", "--file", "swap.proc", "swapAB", "--tol", "-1"]).exit_code == 2


def test_main_usage_goes_to_stderr(capsys):
    assert main(["no-such-command"]) == 2
    out, err = capsys.readouterr()
    assert out == "" and err


def test_main_prints_result(capsys):
    assert main(["parse", "--file", "diamond_stoch.proc", "--format", "json"]) == 0
    out, _ = capsys.readouterr()
    assert json.loads(out)["verdict"] is True


def test_main_parse_error_reports_position(capsys):
    assert main(["parse", "--file", "errors/syntax.proc"]) == 2
    _, err = capsys.readouterr()
    assert "errors/syntax.proc:" in err


def test_print_roundtrip():
    res = run(["parse", "--file", "diamond_stoch.proc", "--print"])
    golden = (FIXTURES / "golden" / "diamond_stoch.proc").read_text()
    assert res.details["text"] == golden


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "causalkit", "check-nonsig", "--file", "swap.proc", "swapAB", "--format", "json"],
        capture_output=True, text=True, cwd=FIXTURES,
    )
    assert proc.returncode == 1
    assert json.loads(proc.stdout)["exit_code"] == 1

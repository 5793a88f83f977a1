from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import EXAMPLE, SOL2_T, SOL2_Z
from weblin.cli import Config, cmd_analyze, dumps, main

GOLDEN = Path(__file__).parent / "golden"


def run_cli(*args, cwd=None):
    return subprocess.run([sys.executable, "-m", "weblin", *args], capture_output=True, text=True,
                          cwd=cwd, timeout=240)


def _skeleton(obj):
    if isinstance(obj, dict):
        return {k: _skeleton(v) for k, v in sorted(obj.items())}
    if isinstance(obj, list):
        return [_skeleton(obj[0])] if obj else []
    return type(obj).__name__


@pytest.fixture(scope="module")
def analyze_example(tmp_path_factory):
    d = tmp_path_factory.mktemp("analyze")
    out = d / "report.json"
    proc = run_cli("analyze", "--f", EXAMPLE, "--box", "2,3,2,3", "--json", str(out))
    return proc, out


def test_analyze_example(analyze_example):
    proc, out = analyze_example
    assert proc.returncode == 0, proc.stderr
    assert "verdict: LINEARIZABLE bases=[-1]" in proc.stdout
    rep = json.loads(out.read_text())
    assert rep["schema"] == 1
    assert rep["verdict"] == "LINEARIZABLE" and rep["bases"] == ["-1"]
    assert rep["web"]["r"] == "1/(x1^2 + 2*x1*x2 + x2^2 - 2*x1 - 2*x2 + 1)"
    cand = rep["candidates"][0]
    assert cand["passed"] and cand["verdict"]["linearization"]
    assert "timing" not in rep


def test_analyze_deterministic(analyze_example, tmp_path):
    proc, out = analyze_example
    again = tmp_path / "again.json"
    assert main(["analyze", "--f", EXAMPLE, "--box", "2,3,2,3", "--json", str(again)]) == 0
    assert again.read_bytes() == out.read_bytes()


def test_analyze_schema_golden(analyze_example):
    _, out = analyze_example
    expected = json.loads((GOLDEN / "analyze_example.skeleton.json").read_text())
    assert _skeleton(json.loads(out.read_text())) == expected


def test_analyze_parallel_golden(tmp_path):
    out = tmp_path / "p.json"
    proc = run_cli("analyze", "--f", "x1+x2", "--json", str(out))
    assert proc.returncode == 0 and "verdict: PARALLELIZABLE" in proc.stdout
    assert out.read_text() == (GOLDEN / "analyze_parallel.json").read_text()


@pytest.mark.parametrize("args,code", [
    (["analyze", "--f", "x1"], 3),
    (["analyze", "--f", "x1+"], 2),
    (["analyze", "--f", "x1*x2", "--samples", "5"], 2),
    (["analyze", "--f", "x1*x2", "--box", "3,2,2,3"], 2),
    (["analyze", "--f", "a*x1+x2"], 2),
    (["analyze", "--f", "x1*x2", "--param", "a"], 2),
    (["analyze", "--f", "x1*x2", "--tol-base", "-1"], 2),
    (["frobnicate"], 2),
])
def test_exit_codes(args, code, capsys):
    assert main(args) == code


def test_degenerate_json(tmp_path):
    out = tmp_path / "d.json"
    assert main(["analyze", "--f", "x1", "--json", str(out)]) == 3
    assert json.loads(out.read_text())["verdict"] == "DEGENERATE"


def _candidate(tmp_path, data):
    p = tmp_path / "cand.json"
    p.write_text(json.dumps(data) if not isinstance(data, str) else data)
    return str(p)


def test_verify_solution2(tmp_path):
    cand = _candidate(tmp_path, {"s": -1, "t": SOL2_T, "z": SOL2_Z, "params": {"a": 1, "b": 1}})
    out = tmp_path / "v.json"
    proc = run_cli("verify", "--f", EXAMPLE, "--candidate", cand, "--json", str(out))
    assert proc.returncode == 0, proc.stderr
    assert "verdict: LINEARIZATION" in proc.stdout
    rep = json.loads(out.read_text())
    assert rep["verdict"] == "LINEARIZATION" and rep["params"] == {"a": "1", "b": "1"}
    assert all(rep["frobenius"]["symbolic_zero"].values())
    again = tmp_path / "v2.json"
    assert main(["verify", "--f", EXAMPLE, "--candidate", cand, "--json", str(again)]) == 0
    assert again.read_bytes() == out.read_bytes()
    expected = json.loads((GOLDEN / "verify_solution2.skeleton.json").read_text())
    assert _skeleton(rep) == expected


def test_verify_cli_params_override(tmp_path, capsys):
    cand = _candidate(tmp_path, {"s": "-1", "t": "0", "z": "(1-x1-a)/((x1+x2-1)*(x2-a))"})
    assert main(["verify", "--f", EXAMPLE, "--candidate", cand, "--param", "a=1/2"]) == 0
    assert "verdict: LINEARIZATION" in capsys.readouterr().out


def test_verify_rejects(tmp_path, capsys):
    cand = _candidate(tmp_path, {"s": -1, "t": "1", "z": "0"})
    assert main(["verify", "--f", EXAMPLE, "--candidate", cand]) == 0
    assert "verdict: REJECTED" in capsys.readouterr().out


@pytest.mark.parametrize("data", [
    {"s": -1, "t": "1"},
    "{not json",
    [1, 2, 3],
    {"s": -1, "t": "1", "z": "a*x1"},
    {"s": -1, "t": "1+", "z": "0"},
    {"s": -1, "t": True, "z": "0"},
    {"s": -1, "t": "1", "z": "0", "params": {"a": "x"}},
])
def test_verify_input_errors(tmp_path, data, capsys):
    assert main(["verify", "--f", EXAMPLE, "--candidate", _candidate(tmp_path, data)]) == 2
    assert "input error" in capsys.readouterr().err


def test_verify_missing_file(capsys):
    assert main(["verify", "--f", EXAMPLE, "--candidate", "/nonexistent/c.json"]) == 2


def test_timing_flag(tmp_path):
    rep = cmd_analyze(Config(f="x1+x2", timing=True))
    assert "timing" in rep and "webgeom" in rep["timing"]


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6), k=st.integers(1, 4), m=st.integers(1, 4))
def test_report_determinism(seed, k, m):
    # webs f = g(x1) + h(x2) are parallelizable, so the whole pipeline is cheap
    cfg = dict(f=f"x1^{k} + exp({m}*x2)", seed=seed)
    first = dumps(cmd_analyze(Config(**cfg)))
    second = dumps(cmd_analyze(Config(**cfg)))
    assert first == second
    assert json.loads(first)["verdict"] == "PARALLELIZABLE"


def test_number_formatting():
    text = dumps({"x": 1 / 3, "y": float("nan"), "z": [2.0, 1e-20]})
    assert json.loads(text) == {"x": 0.333333333333, "y": None, "z": [2.0, 1e-20]}

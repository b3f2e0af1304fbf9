import json
import os
import shutil
import subprocess
import sys

import pytest

from morseflow.braid import load_braid
from morseflow.cli import (EXIT_INTERNAL, EXIT_INVALID, EXIT_OK, FIXTURES, compare_braids,
                           fixture_path, golden_path, main, selfcheck)
from morseflow.grading import PhaseDiagram, diagram_isomorphic

from conftest import fixture_braid, fixture_result


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def run_subprocess(argv, env=None):
    e = dict(os.environ)
    e.update(env or {})
    return subprocess.run([sys.executable, "-m", "morseflow", *argv], capture_output=True,
                          text=True, env=e, timeout=600)


def golden(name, suffix="report.json"):
    with open(golden_path(name, suffix), encoding="utf-8") as fh:
        return fh.read()


# ----------------------------------------------------------------- analyze


def test_analyze_example_a(capsys, tmp_path):
    dot = tmp_path / "dot"
    table = tmp_path / "lam.txt"
    code, out, _ = run(["analyze", fixture_path("exampleA"), "--dot", str(dot),
                        "--lambda-table", str(table)], capsys)
    assert code == EXIT_OK
    rep = json.loads(out)
    assert rep["sc"]["count"] == 29
    assert len(rep["phase_diagram"]["nodes"]) == 7
    assert rep["morse_relations"]["holds"] is True
    assert out == golden("exampleA")
    assert table.read_text() == golden("exampleA", "lambda.txt")
    assert (dot / "exampleA_reduced.dot").read_text().startswith("digraph reduced {")
    assert (dot / "exampleA_full.dot").read_text().count("->") >= 6


def test_analyze_json_flag(capsys, tmp_path):
    path = tmp_path / "r.json"
    code, out, _ = run(["analyze", fixture_path("sigma_d3"), "--json", str(path)], capsys)
    assert code == EXIT_OK and out == ""
    assert path.read_text(encoding="utf-8") == golden("sigma_d3")


@pytest.mark.parametrize("name", [f for f in FIXTURES if f != "pseudo_anosov"])
def test_reports_match_golden(name, capsys):
    code, out, _ = run(["analyze", fixture_path(name)], capsys)
    assert code == EXIT_OK and out == golden(name)


@pytest.mark.slow
def test_pseudo_anosov_report_matches_golden(capsys):
    code, out, _ = run(["analyze", fixture_path("pseudo_anosov")], capsys)
    assert code == EXIT_OK and out == golden("pseudo_anosov")
    assert len(json.loads(out)["phase_diagram"]["nodes"]) == 10


def test_analyze_debug_chain_maps(capsys, tmp_path):
    path = tmp_path / "r.json"
    code, _, _ = run(["analyze", fixture_path("exampleA"), "--json", str(path),
                      "--debug-chain-maps"], capsys)
    assert code == EXIT_OK
    assert path.read_text(encoding="utf-8") == golden("exampleA")
    lines = (tmp_path / "r.json.triplets").read_text().split("\n")
    assert all(len(line.split()) == 3 for line in lines if line)


def test_lambda_table_needs_d2(capsys, tmp_path):
    code, _, err = run(["analyze", fixture_path("sigma_d3"), "--lambda-table",
                        str(tmp_path / "x")], capsys)
    assert code == EXIT_INVALID and "d = 2" in err


@pytest.mark.parametrize("content", ["not json", '{"m": 3}',
                                     '{"m": 3, "d": 1, "anchors": [[0, 0], [1, 1], [1, 2]]}'])
def test_malformed_file(content, capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(content)
    code, out, err = run(["analyze", str(path)], capsys)
    assert code == EXIT_INVALID and out == ""
    assert err.startswith(f"error: {path}")


def test_missing_file(capsys, tmp_path):
    code, _, err = run(["analyze", str(tmp_path / "none.json")], capsys)
    assert code == EXIT_INVALID and "none.json" in err


def test_cell_budget(capsys):
    code, _, err = run(["analyze", fixture_path("exampleA"), "--cell-budget", "100"], capsys)
    assert code == EXIT_INVALID and "budget" in err.lower()


# -------------------------------------------------------------- word2braid


def test_word2braid_single_letter(capsys):
    code, out, _ = run(["word2braid", "s1", "2"], capsys)
    assert code == EXIT_OK
    obj = json.loads(out)
    assert obj["d"] == 1 and obj["m"] == 4


def test_word2braid_sigma_matches_fixture(capsys, tmp_path):
    path = tmp_path / "w.json"
    code, _, _ = run(["word2braid", "s1 s1 s1 s1 s1 s2", "3", "-o", str(path)], capsys)
    assert code == EXIT_OK
    b = load_braid(str(path))
    assert (b.m, b.d) == (5, 6)
    # same invariants as the other presentations of the class
    assert compare_braids(b, fixture_braid("sigma_d3")) == {"isomorphic": True,
                                                            "polynomial_equal": True}


@pytest.mark.parametrize("word", ["s1 x2", "s0", "s3"])
def test_word2braid_bad_token(word, capsys):
    code, out, err = run(["word2braid", word, "2"], capsys)
    assert code == EXIT_INVALID and out == "" and err.startswith("error:")


# ------------------------------------------------------------------ extend


def test_extend_zero_is_identity(capsys):
    code, out, _ = run(["extend", fixture_path("exampleA"), "0"], capsys)
    assert code == EXIT_OK
    with open(fixture_path("exampleA")) as fh:
        assert json.loads(out) == json.load(fh)


def test_extend_once(capsys, tmp_path):
    path = tmp_path / "e.json"
    code, _, _ = run(["extend", fixture_path("exampleA"), "1", "-o", str(path)], capsys)
    assert code == EXIT_OK
    b = load_braid(str(path))
    assert (b.m, b.d) == (8, 3)
    code, _, _ = run(["extend", fixture_path("exampleA"), "2", "-o", str(path)], capsys)
    assert load_braid(str(path)).d == 4


def test_extend_negative(capsys):
    code, out, err = run(["extend", fixture_path("exampleA"), "-1"], capsys)
    assert code == EXIT_INVALID and out == ""


# ----------------------------------------------------------------- compare


def test_compare_sigma(capsys):
    code, out, _ = run(["compare", fixture_path("sigma_d3"), fixture_path("sigma_d4")], capsys)
    assert code == EXIT_OK
    assert json.loads(out) == {"isomorphic": True, "polynomial_equal": True}


def test_compare_self_and_other(capsys):
    _, out, _ = run(["compare", fixture_path("exampleA"), fixture_path("exampleA")], capsys)
    assert json.loads(out) == {"isomorphic": True, "polynomial_equal": True}
    _, out, _ = run(["compare", fixture_path("exampleA"), fixture_path("sigma_d3")], capsys)
    assert json.loads(out) == {"isomorphic": False, "polynomial_equal": False}


@pytest.mark.slow
def test_compare_against_pseudo_anosov(capsys):
    _, out, _ = run(["compare", fixture_path("exampleA"), fixture_path("pseudo_anosov")], capsys)
    assert json.loads(out)["isomorphic"] is False


# --------------------------------------------------------------- selfcheck


def fixture_copy(tmp_path):
    d = tmp_path / "fx"
    d.mkdir()
    for name in FIXTURES:
        shutil.copy(fixture_path(name), d / f"{name}.json")
    return d


def test_selfcheck_clean(capsys):
    code, out, _ = run(["selfcheck", "--verbose", "--skip", "pseudo_anosov"], capsys)
    assert code == EXIT_OK
    lines = out.strip().split("\n")
    assert lines[-1] == "selfcheck ok"
    assert all(line.startswith("PASS ") for line in lines[:-1])
    checks = " ".join(lines)
    for what in ["birkhoff", "squares to zero", "attracting blocks", "sampled down-sets",
                 "Morse relations", "one point", "golden"]:
        assert what in checks


def test_selfcheck_corrupted_fixture(capsys, tmp_path):
    d = fixture_copy(tmp_path)
    obj = json.loads((d / "sigma_d3.json").read_text())
    # duplicate height in one column: no longer a permutation
    obj["anchors"][1][1] = obj["anchors"][2][1]
    (d / "sigma_d3.json").write_text(json.dumps(obj))
    code, _, err = run(["selfcheck", "--fixtures", str(d), "--skip", "pseudo_anosov"], capsys)
    assert code == EXIT_INTERNAL
    assert "sigma_d3" in err


def test_selfcheck_function_reports_failures(tmp_path):
    d = fixture_copy(tmp_path)
    (d / "exampleA.json").write_text("{")
    logged = []
    failures = selfcheck(True, str(d), skip=("pseudo_anosov", "sigma_d4", "sigma_d5"),
                         log=logged.append)
    assert len(failures) == 1 and failures[0].startswith("exampleA")
    assert any(line.startswith("FAIL exampleA") for line in logged)


# ------------------------------------------------------------- determinism


def test_subprocess_deterministic_across_threads():
    outs = []
    for threads in ["1", "4"]:
        p = run_subprocess(["analyze", fixture_path("sigma_d4")], {"MORSEFLOW_THREADS": threads})
        assert p.returncode == EXIT_OK, p.stderr
        outs.append(p.stdout)
    assert outs[0] == outs[1] == golden("sigma_d4")


def test_subprocess_exit_codes(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("[]")
    assert run_subprocess(["analyze", str(bad)]).returncode == EXIT_INVALID
    assert run_subprocess(["word2braid", "s1", "2"]).returncode == EXIT_OK


def test_report_diagram_round_trip(capsys):
    _, out, _ = run(["analyze", fixture_path("exampleA")], capsys)
    red = PhaseDiagram.from_dict(json.loads(out)["phase_diagram"])
    assert diagram_isomorphic(red, fixture_result("exampleA").reduced)
    assert red.total() == fixture_result("exampleA").total()

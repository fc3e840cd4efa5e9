import json

import numpy as np
import pytest

from quasiflat.cli import main
from quasiflat.magic import matrix_from_json


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, "--json", *argv)
    return code, json.loads(out)


def test_latin_enumerate_count(capsys):
    assert run(capsys, "latin", "enumerate", "--n", "2", "--k", "1", "--count-only")[:2] == (0, "2\n")
    code, rep = run_json(capsys, "latin", "enumerate", "--n", "3", "--k", "2")
    assert code == 0 and rep["count"] == len(rep["squares"]) == 12


def test_latin_group_and_admissible(capsys):
    code, rep = run_json(capsys, "latin", "group", "--square", "3x3_k2")
    assert code == 0 and rep["order"] == 6
    code, rep = run_json(capsys, "latin", "admissible", "--n", "3", "--k", "3", "--group", "S3")
    assert code == 0 and rep["count"] == 12
    code, out, _ = run(capsys, "latin", "admissible", "--n", "3", "--k", "3", "--group", "S3",
                       "--format", "csv")
    assert out.splitlines()[:2] == ["key,value", "count,12"]


def test_orbits(capsys):
    code, rep = run_json(capsys, "orbits", "--family", "free_3_2")
    assert code == 0 and rep["blocks"] == [[1, 2, 3], [4, 5, 6]] and rep["quasi_transitivity"] == 3
    code, rep = run_json(capsys, "orbits", "--group", "S3")
    assert code == 0 and rep["blocks"] == [[1, 2, 3]]


def test_model_commands(capsys, tmp_path):
    code, rep = run_json(capsys, "model", "sample", "--family", "amalgamated_4_2_2_2", "--seed", "3")
    assert code == 0
    point = tmp_path / "point.json"
    point.write_text(json.dumps(rep["point"]))
    code, ev = run_json(capsys, "model", "eval", "--family", "amalgamated_4_2_2_2",
                        "--word", "1:3,2:1", "--point", str(point))
    assert code == 0 and ev["word"]["central"] == 1
    A = matrix_from_json(ev["matrix"])
    assert abs(complex(*ev["trace"]) - np.trace(A) / 4) < 1e-12
    code, tr = run_json(capsys, "model", "trace", "--family", "free_3_2", "--word", "1:1,2:1",
                        "--samples", "200")
    assert code == 0 and tr["estimate"]["samples"] == 200


def test_inline_family(capsys):
    code, rep = run_json(capsys, "model", "trace", "--family", '{"variant": "FreeProduct", "K": 2, "M": 2}',
                         "--word", "1:2", "--samples", "5")
    assert code == 0 and rep["estimate"]["mean"] == [1.0, 0.0]


@pytest.mark.parametrize("argv,expected", [
    (["analyze", "faithful", "--family", "free_3_2", "--max-len", "3", "--samples", "30"], 0),
    (["analyze", "faithful", "--family", "commuting_4_2_2_2", "--max-len", "5", "--samples", "30"], 1),
    (["analyze", "stationary", "--group", "S3", "--k", "2", "--exact"], 0),
    (["analyze", "stationary", "--group", "S3", "--k", "2", "--samples", "2000"], 0),
    (["analyze", "cesaro", "--square", "circulant_3", "--kmax", "10"], 0),
    (["analyze", "cesaro", "--square", "3x3_k2", "--kmax", "100"], 1),
    (["analyze", "thoma", "--group", "S3", "--subgroup", "A3"], 0),
    (["analyze", "obstruction", "--k", "2", "--samples", "10"], 0),
    (["selftest", "--criteria", "8"], 0),
    (["selftest", "--criteria", "8", "--tol", "1e-30"], 1),
])
def test_analysis_exit_codes(capsys, argv, expected):
    code, out, _ = run(capsys, *argv)
    assert code == expected
    assert ("PASS" if expected == 0 else "FAIL") in out


@pytest.mark.parametrize("argv", [
    ["analyze", "bogus"],
    ["latin", "enumerate", "--n", "2"],
    ["latin", "enumerate", "--n", "2", "--k", "3"],
    ["latin", "group", "--square", "no_such_square"],
    ["model", "trace", "--family", "free_3_2", "--word", "4:1"],
    ["analyze", "stationary", "--group", "diagS2", "--k", "3"],
    ["orbits"],
    ["--unknown-flag", "orbits", "--group", "S3"],
])
def test_usage_errors_exit_2(capsys, argv):
    with pytest.raises(SystemExit) as exc:
        raise SystemExit(main(argv))
    assert exc.value.code == 2


def test_json_output_is_deterministic(capsys):
    argv = ["analyze", "faithful", "--family", "amalgamated_4_2_2_2", "--max-len", "3",
            "--samples", "20", "--seed", "7"]
    _, a, _ = run(capsys, "--json", *argv)
    _, b, _ = run(capsys, *argv, "--json")
    assert a == b
    rep = json.loads(a)
    assert rep["config"]["seed"] == 7 and rep["version"]
    _, c, _ = run(capsys, "--json", *argv[:-1], "8")
    assert c != a


def test_selftest_lines(capsys):
    code, out, _ = run(capsys, "selftest", "--criteria", "7,8")
    assert code == 0
    lines = [ln for ln in out.splitlines() if ln.startswith("[")]
    assert len(lines) == 2 and all(ln.startswith("[PASS] criterion") for ln in lines)

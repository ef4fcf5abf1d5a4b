import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphheat import VertexFunction
from graphheat.cli import EXIT_CHECK_FAILED, EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from graphheat.errors import SelfLoop
from graphheat.io import (
    FormatError,
    format_function,
    format_graph,
    parse_function,
    parse_graph,
    write_atomic,
)

from .conftest import random_connected_graph


@pytest.fixture
def files(tmp_path):
    def write(name, text):
        path = tmp_path / name
        path.write_text(text)
        return str(path)

    return write


# -- text formats --------------------------------------------------------------


def test_parse_graph_comments_and_blank_lines():
    G = parse_graph("# a comment\n\nb a 1.5\n  b c 2\n")
    assert G.vertices == ("a", "b", "c")
    assert G.edges == (("a", "b", 1.5), ("b", "c", 2.0))
    # only whole-line comments are recognised
    with pytest.raises(FormatError):
        parse_graph("a b 1 # trailing\n")


@pytest.mark.parametrize("text", ["a b\n", "a b c d\n", "a b one\n"])
def test_parse_graph_malformed(text):
    with pytest.raises(FormatError):
        parse_graph(text)


def test_parse_graph_validation_errors_propagate():
    with pytest.raises(SelfLoop):
        parse_graph("a a 1\n")


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 30))
def test_graph_roundtrip_is_canonical(seed, n):
    G = random_connected_graph(np.random.default_rng(seed), n)
    text = format_graph(G)
    H = parse_graph(text)
    assert H.vertices == G.vertices and H.edges == G.edges
    assert format_graph(H) == text


def test_function_roundtrip():
    f = VertexFunction({"x": 0.1, "a": -2.5e-300, "m": 3.0})
    g = parse_function(format_function(f))
    assert g == f and list(g) == ["a", "m", "x"]


def test_function_duplicate_vertex():
    with pytest.raises(FormatError):
        parse_function("a 1\na 2\n")


def test_write_atomic_replaces_and_leaves_no_temp(tmp_path):
    target = tmp_path / "sub" / "out.txt"
    write_atomic(target, "one")
    write_atomic(target, "two")
    assert target.read_text() == "two"
    assert sorted(p.name for p in target.parent.iterdir()) == ["out.txt"]


# -- command line ----------------------------------------------------------------


def test_verify_k2(files, capsys):
    g = files("k2.txt", "a b 1\n")
    assert main(["verify", "--graph", g, "--trials", "100", "--seed", "0"]) == EXIT_OK
    reports = json.loads(capsys.readouterr().out)
    assert all(r["passed"] for r in reports)
    assert {r["check"] for r in reports} >= {"product_rule", "gamma2_closed_form", "bochner_minus"}


def test_verify_zero_trials_is_vacuous(files, capsys):
    g = files("k2.txt", "a b 1\n")
    assert main(["verify", "--graph", g, "--trials", "0"]) == EXIT_OK
    assert all(r["passed"] and r["trials"] == 0 for r in json.loads(capsys.readouterr().out))


def test_verify_bad_graph_exit_code(files):
    assert main(["verify", "--graph", files("loop.txt", "a a 1\n")]) == EXIT_DATA
    assert main(["verify", "--graph", "/nonexistent/graph.txt"]) == EXIT_DATA


def test_curvature_k2(files, capsys):
    g = files("k2.txt", "a b 1\n")
    assert main(["curvature", "--graph", g, "--m", "2"]) == EXIT_OK
    assert capsys.readouterr().out == "vertex,k_star\na,1\nb,1\n"
    assert main(["curvature", "--graph", g, "--m", "inf", "--x0", "a"]) == EXIT_OK
    assert capsys.readouterr().out == "vertex,k_star\na,2\n"
    heavy = files("k2_heavy.txt", "a b 7\n")
    assert main(["curvature", "--graph", heavy, "--m", "2"]) == EXIT_OK
    assert capsys.readouterr().out == "vertex,k_star\na,1\nb,1\n"


def test_curvature_rejects_nonpositive_m(files):
    assert main(["curvature", "--graph", files("k2.txt", "a b 1\n"), "--m", "0"]) == EXIT_USAGE


def test_heat_run(files, tmp_path):
    g, f = files("k2.txt", "a b 1\n"), files("f0.txt", "a 0\nb 2\n")
    out = tmp_path / "run"
    code = main(["heat", "--graph", g, "--init", f, "--h", "1e-3", "--T", "1", "--out", str(out)])
    assert code == EXIT_OK
    rows = (out / "trajectory.csv").read_text().splitlines()
    assert rows[0] == "t,a,b"
    t, a, b = map(float, rows[-1].split(","))
    assert t == 1.0 and abs(a - (1 - math.exp(-2))) < 1e-3
    payload = json.loads((out / "report.json").read_text())
    checks = {r["check"]: r for r in payload["reports"]}
    assert checks["max_principle"]["passed"]
    assert payload["manifest"]["params"]["scheme"] == "implicit"


def test_heat_unstable_explicit_is_usage_error(files, tmp_path):
    g, f = files("k2.txt", "a b 1\n"), files("f0.txt", "a 0\nb 2\n")
    code = main(["heat", "--graph", g, "--init", f, "--scheme", "explicit", "--h", "1.5",
                 "--out", str(tmp_path / "x")])
    assert code == EXIT_USAGE


def test_heat_ball_domain(files, tmp_path):
    g = files("p.txt", "".join(f"{i} {i + 1} 1\n" for i in range(6)))
    f = files("f.txt", "".join(f"{i} {float(i == 3)}\n" for i in range(7)))
    out = tmp_path / "ball"
    assert main(["heat", "--graph", g, "--init", f, "--domain", "ball:3:1", "--out", str(out)]) == EXIT_OK
    assert (out / "trajectory.csv").read_text().splitlines()[0] == "t,1,2,3,4,5"
    assert main(["heat", "--graph", g, "--init", f, "--domain", "ball:3", "--out", str(out)]) == EXIT_USAGE


def test_heat_missing_init_argument(files):
    with pytest.raises(SystemExit) as exc:
        main(["heat", "--graph", files("k2.txt", "a b 1\n")])
    assert exc.value.code == EXIT_USAGE


def test_pme_with_lambda(files, tmp_path):
    g = files("k2.txt", "a b 1\n")
    u = files("u0.txt", f"a 1\nb {math.exp(2.0)!r}\n")
    out = tmp_path / "pme"
    assert main(["pme", "--graph", g, "--init", u, "--lambda", "2", "--out", str(out)]) == EXIT_OK
    checks = {r["check"]: r for r in json.loads((out / "report.json").read_text())["reports"]}
    assert checks["aronson_benilan"]["passed"]
    assert checks["energy_chain"]["passed"]


def test_pme_nonpositive_data(files, tmp_path):
    g, u = files("k2.txt", "a b 1\n"), files("u0.txt", "a 0\nb 1\n")
    assert main(["pme", "--graph", g, "--init", u, "--out", str(tmp_path / "p")]) == EXIT_DATA


def test_exhaust(files, tmp_path):
    g = files("path.txt", "".join(f"{i} {i + 1} 1\n" for i in range(-10, 10)))
    u = files("u0.txt", "".join(f"{i} {1.0 + (i == 0)}\n" for i in range(-10, 11)))
    out = tmp_path / "ex"
    code = main(["exhaust", "--graph", g, "--init", u, "--x0", "0", "--radii", "3,6,9",
                 "--out", str(out)])
    assert code == EXIT_OK
    report = json.loads((out / "report.json").read_text())["reports"][0]
    assert report["check"] == "exhaustion" and len(report["details"]["discrepancies"]) == 3
    code = main(["exhaust", "--graph", g, "--init", u, "--x0", "0", "--radii", "1,2",
                 "--out", str(out)])
    assert code == EXIT_DATA


def test_pme_lambda_must_exceed_one(files, tmp_path):
    g = files("k2.txt", "a b 1\n")
    u = files("u0.txt", "a 1\nb 2\n")
    code = main(["pme", "--graph", g, "--init", u, "--lambda", "0.5", "--out", str(tmp_path / "p")])
    assert code == EXIT_USAGE


def test_failed_check_exit_code(files, tmp_path):
    # a zero tolerance cannot absorb roundoff in the identity residuals
    g = files("g.txt", format_graph(random_connected_graph(np.random.default_rng(5), 10)))
    out = tmp_path / "r.json"
    assert main(["verify", "--graph", g, "--tol", "0", "--trials", "5", "--out", str(out)]) == EXIT_CHECK_FAILED
    assert not all(r["passed"] for r in json.loads(out.read_text()))


@pytest.mark.parametrize("command", ["heat", "pme"])
def test_runs_are_byte_identical(files, tmp_path, command):
    g = files("k2.txt", "a b 1\n")
    u = files("u0.txt", "a 1\nb 3\n")
    out = tmp_path / "det"
    blobs = []
    for _ in range(2):
        assert main([command, "--graph", g, "--init", u, "--T", "0.5", "--out", str(out)]) == EXIT_OK
        blobs.append(((out / "trajectory.csv").read_bytes(), (out / "report.json").read_bytes()))
    assert blobs[0] == blobs[1]


def test_verify_is_deterministic(files, tmp_path):
    g = files("g.txt", format_graph(random_connected_graph(np.random.default_rng(3), 12)))
    paths = [tmp_path / f"r{i}.json" for i in range(2)]
    for p in paths:
        assert main(["verify", "--graph", g, "--seed", "11", "--trials", "20", "--out", str(p)]) == EXIT_OK
    assert paths[0].read_bytes() == paths[1].read_bytes()

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from veering.cli import run_command
from veering.fixtures import FIXTURES, sphere4, torus_state
from veering.formats import InvariantError, ParseError, from_json, parse, serialize, to_json

GOOD = """veering 1
genus 1
marked 1
triangle c+ a+ b+
triangle c- a- b-
colours a=B b=R c=B
"""


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_round_trip_text_and_json(name):
    t = FIXTURES[name]()
    t2, vec = parse(serialize(t))
    assert t2 == t and vec is None
    t3, _ = from_json(to_json(t))
    assert t3 == t


@given(st.floats(0.01, 0.99, allow_subnormal=False))
def test_geometry_round_trips_exactly(s):
    st_ = torus_state()
    vec = dict(st_.vectors)
    vec["a"] = (s * 0.3, vec["a"][1])
    t, back = parse(serialize(st_.triangulation, vec))
    assert back == vec
    _, back_json = from_json(to_json(st_.triangulation, vec))
    assert back_json == vec


@pytest.mark.parametrize(
    "text, line, exc",
    [
        (GOOD.replace("c+ a+ b+", "c+ a+ b*"), 4, ParseError),
        (GOOD.replace("genus 1", "genus one"), 2, ParseError),
        (GOOD + "triangle c- a- b-\n", 7, ParseError),
        (GOOD.replace("a=B", "a=G"), 6, ParseError),
        (GOOD + "wobble\n", 7, ParseError),
        (GOOD.replace("c- a- b-", "c- a- d-"), None, InvariantError),
    ],
)
def test_parse_errors_carry_locations(text, line, exc):
    with pytest.raises(exc) as info:
        parse(text)
    if line is not None:
        assert info.value.line == line


def test_bad_json_reports_position():
    with pytest.raises(ParseError) as info:
        from_json('{"format": 1,,}')
    assert info.value.line == 1


def run(capsys, *argv):
    code = run_command(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cli_matrix_fixture(capsys):
    code, out, _ = run(capsys, "matrix", "--fixture", "torus", "--word", "c,b,c,a")
    assert code == 0
    assert out.strip() == "[[1,2,0],[2,5,0],[2,6,1]]"


def test_cli_validate_and_stratum(capsys, tmp_path):
    assert run(capsys, "validate", "--fixture", "sphere4")[0] == 0
    code, out, _ = run(capsys, "stratum", "--fixture", "sphere4")
    assert "kappa [-1, -1, -1, -1]" in out
    path = tmp_path / "s.tri"
    path.write_text(serialize(sphere4()))
    assert run(capsys, "validate", "--file", str(path))[0] == 0


def test_cli_exit_codes(capsys, tmp_path):
    assert run(capsys, "nonsense")[0] == 2
    assert run(capsys, "flow", "--fixture", "torus")[0] == 2
    assert run(capsys, "matrix", "--fixture", "torus", "--word", "a")[0] == 1
    bad = tmp_path / "bad.tri"
    bad.write_text(GOOD.replace("b+", "b?"))
    code, _, err = run(capsys, "validate", "--file", str(bad))
    assert code == 1 and "line 4" in err


def test_cli_flow_is_reproducible(capsys, tmp_path):
    out1 = tmp_path / "a.csv"
    out2 = tmp_path / "b.csv"
    for out in (out1, out2):
        assert run(capsys, "flow", "--fixture", "sphere4", "--seed", "3", "--returns", "50", "--out", str(out))[0] == 0
    assert out1.read_text() == out2.read_text()
    first = out1.read_text().splitlines()
    assert first[0].startswith("# config: ")
    assert json.loads(first[0][len("# config: ") :])["seed"] == 3
    assert first[1] == "event_index,roof,flipped_labels,symbol_key"
    assert len(first) == 52


def test_cli_flip_with_geometry(capsys):
    code, out, _ = run(capsys, "flip", "--fixture", "torus-state", "--edge", "c")
    assert code == 0
    assert out.startswith("# c:R")


def test_cli_enumerate(capsys):
    code, out, _ = run(capsys, "enumerate", "--genus", "1", "--marked", "1")
    assert code == 0
    assert "core triangulations 2" in out
    assert "strongly connected per stratum: True" in out

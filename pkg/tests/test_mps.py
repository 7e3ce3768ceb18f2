import numpy as np
import pytest
from scipy import sparse

from rapo.core import RiskSettings, flexibility_preset
from rapo.instance import bundled_instance_path, load_instance
from rapo.model import build
from rapo.solver import (
    InterchangeParseError,
    LinearProgram,
    SolveOptions,
    SolverBackend,
    read_interchange,
    solve,
    write_interchange,
)
from rapo.solver.mps import unique_names
from rapo.synthetic import make_synthetic


def sample_program() -> LinearProgram:
    inf = np.inf
    return LinearProgram(
        name="sample",
        objective=np.array([1.0, -2.0, 0.0, 0.5]),
        offset=7.0,
        matrix=sparse.csr_matrix(np.array([
            [1.0, 1.0, 0.0, 0.0],
            [0.0, 2.0, -1.0, 0.0],
            [1.0, 0.0, 0.0, 3.0],
            [0.0, 0.0, 1.0, 1.0],
            [1.0, -1.0, 1.0, -1.0],
        ])),
        row_lower=np.array([-inf, 1.0, 2.0, 4.0, -inf]),
        row_upper=np.array([10.0, inf, 5.0, 4.0, inf]),
        col_lower=np.array([0.0, -inf, -3.0, 2.0]),
        col_upper=np.array([inf, 8.0, inf, 2.0]),
        row_names=("cap[a]", "demand[b]", "range", "fixed", "free"),
        col_names=("x[1]", "x[2]", "y", "z"),
    )


def test_round_trip_keeps_the_program():
    lp = sample_program()
    back = read_interchange(write_interchange(lp))
    assert back.name == "sample"
    assert back.row_names == lp.row_names
    assert back.col_names == lp.col_names
    assert back.offset == pytest.approx(lp.offset)
    np.testing.assert_allclose(back.objective, lp.objective)
    np.testing.assert_allclose(back.matrix.toarray(), lp.matrix.toarray())
    np.testing.assert_array_equal(back.row_lower, lp.row_lower)
    np.testing.assert_array_equal(back.row_upper, lp.row_upper)
    np.testing.assert_array_equal(back.col_lower, lp.col_lower)
    np.testing.assert_array_equal(back.col_upper, lp.col_upper)


def test_ranged_rows_are_written_as_ranges():
    text = write_interchange(sample_program())
    assert " G  range" in text
    assert "    RNG  range  3" in text
    assert " N  free" in text
    assert " FX BND  z  2" in text
    assert " MI BND  x[2]" in text
    assert text.endswith("ENDATA\n")


def test_renamed_labels_are_documented():
    lp = sample_program().model_copy(update={
        "row_names": ("cap a", "demand[b]", "range", "fixed", "free"),
        "col_names": ("x 1", "x_1", "y", "z"),
    })
    text = write_interchange(lp)
    assert "* row cap_a is cap a" in text
    assert "* column x_1 is x 1" in text
    assert "* column x_1~1 is x_1" in text
    back = read_interchange(text)
    assert back.col_names == ("x_1", "x_1~1", "y", "z")


def test_unique_names_avoid_the_objective_row():
    assert unique_names(["obj", "obj", "a b"]) == ["obj", "obj~1", "a_b"]


def test_plan_program_round_trip(hedging):
    lp = build(hedging, RiskSettings(omega=0.6, alpha=0.75), flexibility_preset("base"))
    back = read_interchange(write_interchange(lp))
    assert back.row_names == lp.row_names
    assert back.col_names == lp.col_names
    options = SolveOptions(backend=SolverBackend.SIMPLEX)
    assert solve(back, options).objective == pytest.approx(solve(lp, options).objective, rel=1e-9)


ROUND_TRIP_CASES = {
    "hedging": ("hedging", "base"),
    "demand-response": ("demand_response", "dr-intermediate"),
    "ntc": ("ntc", "ntc"),
    "psp": ("psp", "psp-reduced"),
    "toy": ("toy", "flex-moderate"),
    "synthetic": ("synthetic", "base"),
}


@pytest.fixture
def synthetic():
    return make_synthetic(1)


@pytest.mark.parametrize("case", ROUND_TRIP_CASES)
def test_round_trip_keeps_the_optimum_of_every_instance(request, case):
    fixture, setting = ROUND_TRIP_CASES[case]
    instance = request.getfixturevalue(fixture)
    lp = build(instance, RiskSettings(omega=0.6, alpha=0.75), flexibility_preset(setting))
    text = write_interchange(lp)
    back = read_interchange(text)
    assert back.col_names == lp.col_names
    assert write_interchange(back) == text
    options = SolveOptions(backend=SolverBackend.HIGHS)
    assert solve(back, options).objective == pytest.approx(solve(lp, options).objective, rel=1e-9)


def test_written_text_is_byte_stable(toy):
    risk = RiskSettings(omega=0.4, alpha=0.9)
    flex = flexibility_preset("flex-moderate")
    lp = build(toy, risk, flex)
    text = write_interchange(lp)
    assert write_interchange(lp) == text
    # an independent build of the same instance emits the same rows in the same order
    assert write_interchange(build(toy, risk, flex)) == text
    reloaded = load_instance(bundled_instance_path())
    assert write_interchange(build(reloaded, risk, flex)) == text


MAXIMISE = """\
NAME          max
OBJSENSE
    MAX
ROWS
 N  profit
 L  cap
COLUMNS
    x  profit  3  cap  1
    y  profit  2  cap  1
RHS
    RHS  cap  4
    RHS  profit  -1
BOUNDS
 UP BND  x  3
ENDATA
"""


def test_maximisation_is_negated():
    lp = read_interchange(MAXIMISE)
    np.testing.assert_allclose(lp.objective, [-3.0, -2.0])
    assert lp.offset == pytest.approx(-1.0)
    report = solve(lp, SolveOptions(backend=SolverBackend.SIMPLEX))
    # max 3x + 2y + 1 with x <= 3 and x + y <= 4
    assert -report.objective == pytest.approx(12.0)


def test_ranges_follow_the_row_type():
    text = """\
NAME
ROWS
 N  obj
 E  up
 E  down
 L  less
 G  more
COLUMNS
    x  up  1  down  1
    x  less  1  more  1
RHS
    RHS  up  2  down  2
    RHS  less  5  more  1
RANGES
    RNG  up  3  down  -3
    RNG  less  -2  more  -4
ENDATA
"""
    lp = read_interchange(text)
    np.testing.assert_array_equal(lp.row_lower, [2.0, -1.0, 3.0, 1.0])
    np.testing.assert_array_equal(lp.row_upper, [5.0, 2.0, 5.0, 5.0])


@pytest.mark.parametrize(
    "text, line_no, message",
    [
        ("NAME x\nROWS\n N  obj\nCOLUMNS\n    x  obj  1\n", 5, "missing ENDATA"),
        ("NAME x\nROWS\n N  obj\nCOLUMNS\n    x  cap  1\nENDATA\n", 5, "unknown row cap"),
        ("NAME x\nROWS\n N  obj\n L  c\n L  c\nENDATA\n", 5, "defined twice"),
        ("NAME x\nSOS\nENDATA\n", 2, "unknown section"),
        ("NAME x\nROWS\n N  obj\nCOLUMNS\n    x  obj  one\nENDATA\n", 5, "not a number"),
        (
            "NAME x\nROWS\n N  obj\nCOLUMNS\n    MARKER  'MARKER'  'INTORG'\nENDATA\n",
            5,
            "integer markers",
        ),
        (
            "NAME x\nROWS\n N  obj\nCOLUMNS\n    x  obj  1\nBOUNDS\n BV BND  x\nENDATA\n",
            7,
            "integer bound BV",
        ),
    ],
)
def test_malformed_text_is_rejected(text, line_no, message):
    with pytest.raises(InterchangeParseError, match=message) as info:
        read_interchange(text)
    assert info.value.line_no == line_no


def test_later_free_rows_are_kept():
    text = "NAME\nROWS\n N  obj\n N  extra\nCOLUMNS\n    x  obj  1  extra  2\nENDATA\n"
    lp = read_interchange(text)
    assert lp.row_names == ("extra",)
    assert lp.row_lower[0] == -np.inf and lp.row_upper[0] == np.inf
    np.testing.assert_allclose(lp.objective, [1.0])

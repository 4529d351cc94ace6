from fractions import Fraction

import pytest

from qhblowup.errors import ProblemParseError
from qhblowup.problem import (
    builtin_problem,
    builtin_problem_dir,
    parse_expansion,
    parse_problem,
    rational_expr,
    real_expr,
    serialize_problem,
)

BUILTINS = sorted(p.stem for p in builtin_problem_dir().glob("*.toml") if not p.stem.endswith("_expansion"))

SIMPLE = """
name = "demo"
variables = ["u", "v"]
alpha = [1, 2]
k = "1"

[parameters]
a = "1/3"

[[components]]
terms = [["1", [2, 0]], ["-1", [0, 1]]]

[[components]]
terms = [["a", [3, 0]]]
"""


def test_rational_expressions():
    assert rational_expr("1/3 + 1/6") == Fraction(1, 2)
    assert rational_expr("2*a - 1", {"a": Fraction(3, 4)}) == Fraction(1, 2)
    assert rational_expr("(1 - a)**2", {"a": Fraction(1, 2)}) == Fraction(1, 4)
    with pytest.raises(ValueError):
        rational_expr("sqrt(2)")
    with pytest.raises(ValueError):
        rational_expr("b", {"a": 1})


def test_real_expressions():
    assert float(real_expr("sqrt(2)/48")) == pytest.approx(2 ** 0.5 / 48, rel=1e-15)
    assert float(real_expr("1/(2*sqrt(2))")) == pytest.approx(1 / (2 * 2 ** 0.5), rel=1e-15)


def test_parameters_substituted_before_analysis():
    spec = parse_problem(SIMPLE)
    field = spec.to_field()
    assert field.components[1].numerator.terms == {(3, 0): Fraction(1, 3)}


@pytest.mark.parametrize("name", BUILTINS)
def test_round_trip_is_canonical(name):
    spec = builtin_problem(name)
    text = serialize_problem(spec)
    again = parse_problem(text)
    assert serialize_problem(again) == text
    assert again.to_field().components == spec.to_field().components


def test_toml_error_has_location():
    bad = SIMPLE.replace('k = "1"', "k = ")
    with pytest.raises(ProblemParseError) as info:
        parse_problem(bad)
    assert info.value.line is not None


def test_bad_coefficient_located():
    bad = SIMPLE.replace('["a", [3, 0]]', '["zz", [3, 0]]')
    with pytest.raises(ProblemParseError) as info:
        parse_problem(bad)
    assert info.value.line == SIMPLE.splitlines().index('terms = [["a", [3, 0]]]') + 1


def test_wrong_alpha_length():
    with pytest.raises(ProblemParseError):
        parse_problem(SIMPLE.replace("alpha = [1, 2]", "alpha = [1]"))


def test_missing_key():
    with pytest.raises(ProblemParseError):
        parse_problem(SIMPLE.replace('k = "1"\n', ""))


def test_expansion_file():
    text = (builtin_problem_dir() / "log2_expansion.toml").read_text()
    spec = parse_expansion(text, ["u", "v"])
    assert (0, "1", "-1") in spec.terms
    assert (1, "1/3", "0") in spec.terms

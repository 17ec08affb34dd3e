import cmath

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aaklab.density import DensityEvaluationError, DensitySyntaxError, parse_density


def test_exponential_density_at_zero():
    assert parse_density("7*exp(i*t)")(0.0) == pytest.approx(7)


def test_constant():
    d = parse_density("1")
    assert np.all(d(np.linspace(-0.9, 0.9, 7)) == 1)


def test_rational_density_matches_direct_arithmetic():
    assert complex(parse_density("-(3+i)/(t-2*i)")(0.4)) == pytest.approx(-(3 + 1j) / (0.4 - 2j), rel=1e-15)


@pytest.mark.parametrize("src, t, expected", [
    ("2^3", 0.0, 8),
    ("-t^2", 0.5, 0.25),           # the grammar applies ^ to the signed operand
    ("1+2*3", 0.0, 7),
    ("(1+2)*3", 0.0, 9),
    ("8/2/2", 0.0, 2),
    ("t^-1", 0.25, 4),
    ("sqrt(t)*sqrt(t)", 0.3, 0.3),
    ("(2-4*i)*log(t)", 0.7, (2 - 4j) * cmath.log(0.7)),
    ("sin(t)^2+cos(t)^2", 0.37, 1),
])
def test_precedence_and_functions(src, t, expected):
    assert complex(parse_density(src)(t)) == pytest.approx(expected, rel=1e-14, abs=1e-15)


@pytest.mark.parametrize("src, pos", [("1+", 2), ("foo(t)", 0), ("2*$", 2), ("(t", 2), ("t^1.5", 2)])
def test_syntax_errors_carry_position(src, pos):
    with pytest.raises(DensitySyntaxError) as info:
        parse_density(src)
    assert info.value.pos == pos


def test_log_of_zero_is_rejected():
    with pytest.raises(DensityEvaluationError):
        parse_density("log(t)").check_on(-0.5, 0.5)


def test_branch_cut_crossing_is_rejected():
    # argument -1 + i t crosses the negative real axis at t = 0
    with pytest.raises(DensityEvaluationError):
        parse_density("sqrt(-1+i*t)").check_on(-0.5, 0.5)


leaf = st.sampled_from(["t", "i", "2", "0.5", "3.25"])


def _combine(children):
    binary = st.tuples(children, st.sampled_from(["+", "-", "*"]), children).map(
        lambda x: f"({x[0]}{x[1]}{x[2]})")
    call = st.tuples(st.sampled_from(["exp", "sin", "cos"]), children).map(lambda x: f"{x[0]}({x[1]})")
    power = st.tuples(children, st.integers(0, 3)).map(lambda x: f"({x[0]}^{x[1]})")
    neg = children.map(lambda s: f"-{s}")
    return st.one_of(binary, call, power, neg)


expressions = st.recursive(leaf, _combine, max_leaves=8)


@settings(max_examples=200, deadline=None)
@given(expressions)
def test_round_trip_through_printer(src):
    d = parse_density(src)
    again = parse_density(d.to_source())
    t = np.linspace(-0.9, 0.9, 11).astype(complex)
    a, b = d(t), again(t)
    finite = np.isfinite(a)
    assert np.array_equal(finite, np.isfinite(b))
    np.testing.assert_allclose(b[finite], a[finite], rtol=1e-13, atol=1e-300)

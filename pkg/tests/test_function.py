import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orlicz.errors import EvaluationOverflow, ExpressionSyntaxError, NoBracket, NotOrlicz
from orlicz.function import (
    DEFAULT_GRID,
    BuiltinTag,
    GridSpec,
    OrliczFunction,
    evaluate,
    inverse_at,
    parse_expression,
    parse_orlicz,
    unparse,
    validate,
)

CANONICAL = ["abs(t)^2", "abs(t)^1.5 + 0.5*abs(t)^3", "cosh(t)-1", "exp(abs(t))-1-abs(t)"]


@pytest.mark.parametrize("expr", CANONICAL)
def test_canonical_expressions_validate(expr):
    M = parse_orlicz(expr)
    assert M(0.0) == 0.0
    assert validate(M).passed


def test_builtin_tags():
    assert parse_orlicz("abs(t)^2").builtin_tag == BuiltinTag("power", (2.0,))
    assert parse_orlicz("t^2").builtin_tag == BuiltinTag("power", (2.0,))
    assert parse_orlicz("abs(t)").builtin_tag == BuiltinTag("power", (1.0,))
    assert parse_orlicz("abs(t)^1.5 + 0.5*abs(t)^3").builtin_tag == BuiltinTag("mixed", ((1.0, 1.5), (0.5, 3.0)))
    assert parse_orlicz("cosh(t) - 1").builtin_tag.family == "coshm1"
    assert parse_orlicz("exp(abs(t)) - 1 - abs(t)").builtin_tag.family == "expabs"
    assert parse_orlicz("2*t^2 + cosh(t) - 1").builtin_tag is None


def test_sqrt_rejected_with_convexity_witness():
    with pytest.raises(NotOrlicz) as err:
        parse_orlicz("abs(t)^0.5")
    v = err.value.report.get("convexity")
    assert v is not None
    assert v.witness == (0.0, 1.0, 0.5)
    assert v.residual > 0


def test_odd_function_evenness_witness():
    report = validate(OrliczFunction.from_expression("t"))
    assert not report.passed
    assert report.get("evenness").witness == (1.0, -1.0)


def test_wobbly_function_not_convex():
    M = OrliczFunction.from_callable(lambda t: np.abs(t) * (2.0 + np.sin(t)), "|t|(2+sin t)")
    report = validate(M)
    assert not report.passed
    assert report.get("convexity") is not None


def test_nonzero_at_origin_and_negative_values():
    assert validate(OrliczFunction.from_expression("t^2 + 1")).get("zero") is not None
    assert validate(OrliczFunction.from_expression("0 - t^2")).get("positivity") is not None


def test_report_passed_iff_no_violations():
    for expr in ["t", "t^2", "abs(t)^0.5", "cosh(t)-1", "t^3"]:
        r = validate(OrliczFunction.from_expression(expr))
        assert r.passed == (not r.violations) == bool(r)
        assert r.grid_spec == DEFAULT_GRID.describe()


@pytest.mark.parametrize(
    "M, t, expected",
    [("abs(t)^2", 3.0, 9.0), ("abs(t)", -2.0, 2.0), ("cosh(t)-1", 1.0, math.cosh(1.0) - 1.0)],
)
def test_eval_examples(M, t, expected):
    assert evaluate(parse_orlicz(M), t) == pytest.approx(expected, rel=1e-15)


def test_eval_overflow_and_domain():
    M = parse_orlicz("cosh(t)-1")
    with pytest.raises(EvaluationOverflow):
        M.eval(1e3)
    with pytest.raises(ValueError):
        M.eval(math.inf)
    assert np.isinf(M(np.array([1e3])))[0]


def test_inverse_examples():
    assert inverse_at(parse_orlicz("abs(t)^2"), 1.0) == 1.0
    assert inverse_at(parse_orlicz("abs(t)"), 0.0) == 0.0
    assert inverse_at(parse_orlicz("cosh(t)-1"), 1.0) == pytest.approx(math.acosh(2.0), rel=1e-13)


def test_inverse_round_trip_grid():
    for expr in CANONICAL:
        M = parse_orlicz(expr)
        for y in np.linspace(0.0, 10.0, 41):
            s = inverse_at(M, y)
            assert abs(M.eval(s) - y) <= 1e-12 * max(1.0, y)


def test_inverse_rejects_bad_targets():
    M = parse_orlicz("abs(t)")
    with pytest.raises(ValueError):
        inverse_at(M, -1.0)
    step = OrliczFunction.from_callable(lambda t: np.where(np.abs(t) > 1, 2 * np.abs(t), 0.5 * np.abs(t)), "jump")
    with pytest.raises(NoBracket):
        inverse_at(step, 1.0)


@pytest.mark.parametrize(
    "text, pos",
    [("abs(t", 5), ("t^", 2), ("2**t", 2), ("sin(t)", 0), ("t^t", 2), ("", 0), ("t 2", 2)],
)
def test_syntax_errors_report_position(text, pos):
    with pytest.raises(ExpressionSyntaxError) as err:
        parse_expression(text)
    assert err.value.position == pos


def test_parse_deterministic():
    for expr in CANONICAL:
        assert parse_expression(expr) == parse_expression(expr)
        assert parse_orlicz(expr) == parse_orlicz(expr)


def test_unparse_round_trip():
    for expr in CANONICAL + ["(t^2 + 2*abs(t))^2", "exp(cosh(t)) - exp(1)"]:
        ast = parse_expression(expr)
        assert parse_expression(unparse(ast)) == ast


def test_scaled_function():
    M = parse_orlicz("cosh(t)-1")
    Ms = M.scaled(2.0)
    x = np.linspace(-3, 3, 13)
    np.testing.assert_allclose(Ms(x), M(x / 2.0), rtol=1e-15)
    assert Ms.builtin_tag is None
    with pytest.raises(ValueError):
        M.scaled(0.0)


def test_grid_spec():
    g = GridSpec(n_log=8, lo=1e-2, hi=1e2, n_pairs=5)
    pts = g.points()
    assert pts.size == 17 and pts[8] == 0.0
    np.testing.assert_array_equal(pts[:8], -pts[9:][::-1])


@settings(max_examples=60, deadline=None)
@given(p=st.floats(1.0, 6.0), t=st.floats(-50.0, 50.0))
def test_power_tag_matches_closed_form(p, t):
    M = OrliczFunction.power(p)
    assert M.builtin_tag == BuiltinTag("power", (p,))
    want = abs(t) ** p
    assert float(M(t)) == pytest.approx(want, rel=1e-14, abs=1e-300)


@settings(max_examples=60, deadline=None)
@given(
    coeffs=st.lists(st.tuples(st.floats(0.1, 5.0), st.floats(1.0, 4.0)), min_size=1, max_size=3),
    x=st.floats(-20, 20),
)
def test_mixed_powers_are_even_and_convex(coeffs, x):
    expr = " + ".join(f"{c!r}*abs(t)^{p!r}" for c, p in coeffs)
    M = parse_orlicz(expr, GridSpec(n_log=64, n_pairs=100))
    assert float(M(x)) == float(M(-x))
    assert float(M(x / 2)) <= 0.5 * float(M(x)) + 1e-12


@settings(max_examples=40, deadline=None)
@given(y=st.floats(0.0, 1e6))
def test_inverse_is_monotone_preimage(y):
    M = parse_orlicz("exp(abs(t))-1-abs(t)")
    s = inverse_at(M, y)
    assert s >= 0
    assert abs(float(M(s)) - y) <= 1e-12 * max(1.0, y)

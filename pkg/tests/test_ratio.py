import math

import pytest
from scipy.special import gammaln

from orlicz.errors import NotTwoConcave
from orlicz.function import OrliczFunction, parse_orlicz
from orlicz.ratio import asymptotic_volume_ratio, is_two_concave, john_radius, lp_finite_volume_ratio


def test_two_concavity_examples():
    assert is_two_concave(OrliczFunction.power(2.0)).passed
    assert is_two_concave(OrliczFunction.power(1.0)).passed
    r = is_two_concave(OrliczFunction.power(3.0))
    assert not r.passed
    assert r.witness == (1.0, 4.0, 2.5)
    assert r.residual > 0


def test_cosh_is_not_two_concave():
    # cosh(sqrt(s)) - 1 = sum s^k / (2k)! is convex in s
    assert not is_two_concave(parse_orlicz("cosh(t)-1")).passed
    assert is_two_concave(parse_orlicz("abs(t)^1.5")).passed


def test_john_radius_examples():
    assert john_radius(OrliczFunction.power(2.0), 4) == pytest.approx(2.0, rel=1e-14)
    assert john_radius(OrliczFunction.power(1.0), 9) == pytest.approx(3.0, rel=1e-14)
    with pytest.raises(NotTwoConcave):
        john_radius(parse_orlicz("cosh(t)-1"), 4)
    # without the check it is just the inscribed radius formula
    r = john_radius(parse_orlicz("cosh(t)-1"), 4, require_two_concave=False)
    assert r == pytest.approx(2 * math.acosh(2), rel=1e-12)
    with pytest.raises(ValueError):
        john_radius(OrliczFunction.power(2.0), 0)


def test_volume_ratio_examples():
    assert asymptotic_volume_ratio(OrliczFunction.power(2.0)).vr_limit == pytest.approx(1.0, abs=1e-8)
    r1 = asymptotic_volume_ratio(OrliczFunction.power(1.0))
    assert r1.vr_limit == pytest.approx(math.sqrt(2 * math.e / math.pi), abs=1e-8)
    assert r1.alpha_star == pytest.approx(-1.0, rel=1e-12) and r1.m_inv_one == 1.0
    p = 1.5
    log_vr = math.log(2) + gammaln(1 + 1 / p) + (1 + math.log(p)) / p - 0.5 * math.log(2 * math.pi * math.e)
    r = asymptotic_volume_ratio(OrliczFunction.power(p))
    assert r.vr_limit == pytest.approx(math.exp(log_vr), rel=1e-10)
    assert r.vr_limit == pytest.approx(1.1150180054, rel=1e-9)


def test_volume_ratio_requires_two_concavity():
    with pytest.raises(NotTwoConcave) as err:
        asymptotic_volume_ratio(OrliczFunction.power(3.0))
    assert err.value.report.witness == (1.0, 4.0, 2.5)


def test_sanity_flag_for_unchecked_input():
    r = asymptotic_volume_ratio(OrliczFunction.power(4.0), require_two_concave=False)
    assert not r.two_concave.passed
    assert r.vr_limit < 1 and r.below_one


@pytest.mark.parametrize("expr", ["abs(t)", "abs(t)^1.5", "t^2 + abs(t)"])
@pytest.mark.parametrize("s", [0.5, 3.0])
def test_scale_invariance(expr, s):
    M = parse_orlicz(expr)
    Ms = M.scaled(s)
    assert Ms.inverse_at(1.0) == pytest.approx(s * M.inverse_at(1.0), rel=1e-12)
    assert asymptotic_volume_ratio(Ms).vr_limit == pytest.approx(asymptotic_volume_ratio(M).vr_limit, rel=1e-9)


def test_finite_d_ratio_converges():
    limit = math.sqrt(2 * math.e / math.pi)
    gaps = [abs(lp_finite_volume_ratio(1.0, d) / limit - 1) for d in (10, 100, 1000)]
    assert gaps[2] < gaps[1] < gaps[0]
    assert gaps[2] < 0.01
    assert lp_finite_volume_ratio(2.0, 50) == pytest.approx(1.0, rel=1e-14)

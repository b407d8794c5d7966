import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import gammaln

from orlicz.acceptance import lp_tilt_closed_form
from orlicz.errors import DomainError
from orlicz.function import OrliczFunction, parse_orlicz
from orlicz.tilt import gibbs_logpdf, gibbs_moment, gibbs_pdf, phi, phi_derivatives, solve_tilt

BUILTINS = ["abs(t)", "abs(t)^1.5", "t^2", "abs(t)^3", "abs(t)^4", "abs(t)^1.5 + 0.5*abs(t)^3", "cosh(t)-1", "exp(abs(t))-1-abs(t)"]


def test_phi_examples():
    assert phi(OrliczFunction.power(1.0), -1.0) == pytest.approx(math.log(2.0), rel=1e-12)
    assert phi(OrliczFunction.power(2.0), -0.5) == pytest.approx(0.5 * math.log(2 * math.pi), rel=1e-12)
    want = math.log(2 * math.gamma(4 / 3)) - math.log(2.0) / 3
    assert phi(OrliczFunction.power(3.0), -2.0) == pytest.approx(want, rel=1e-12)
    assert want == pytest.approx(0.348906, abs=1e-6)


def test_phi_domain():
    for a in (0.0, 1.0, math.nan, -math.inf):
        with pytest.raises(DomainError):
            phi(OrliczFunction.power(2.0), a)


def test_phi_derivative_examples():
    assert phi_derivatives(OrliczFunction.power(1.0), -1.0)[0] == pytest.approx(1.0, rel=1e-12)
    d1, d2 = phi_derivatives(OrliczFunction.power(2.0), -0.5)
    assert (d1, d2) == (pytest.approx(1.0, rel=1e-12), pytest.approx(2.0, rel=1e-11))
    assert phi_derivatives(OrliczFunction.power(4.0), -1.0)[0] == pytest.approx(0.25, rel=1e-12)


def test_solve_tilt_examples(gauss_tilt, laplace_tilt):
    t = gauss_tilt
    assert t.alpha_star == pytest.approx(-0.5, rel=1e-12)
    assert t.phi_at == pytest.approx(0.5 * math.log(2 * math.pi), rel=1e-12)
    assert t.sigma_sq == pytest.approx(2.0, rel=1e-11)
    assert t.rate == pytest.approx(math.log(math.sqrt(2 * math.pi * math.e)), rel=1e-12)
    assert laplace_tilt.alpha_star == pytest.approx(-1.0, rel=1e-12)
    assert laplace_tilt.rate == pytest.approx(math.log(2) + 1, rel=1e-12)
    assert solve_tilt(OrliczFunction.power(2.0), 4.0).alpha_star == pytest.approx(-0.125, rel=1e-12)


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0, 4.0])
@pytest.mark.parametrize("R", [0.5, 1.0, 2.0])
def test_power_closed_form(p, R):
    t = solve_tilt(OrliczFunction.power(p), R)
    for got, want in zip((t.alpha_star, t.sigma_sq, t.rate), lp_tilt_closed_form(p, R)):
        assert got == pytest.approx(want, rel=1e-9)
    assert t.rate == t.phi_at - t.alpha_star * R


def test_tilt_invariants_reevaluated():
    for expr in BUILTINS:
        for R in (0.3, 1.0, 5.0):
            t = solve_tilt(parse_orlicz(expr), R)
            assert t.alpha_star < 0 and t.sigma_sq > 0
            d1, _ = phi_derivatives(t.M, t.alpha_star, 1e-12)
            assert abs(d1 - R) <= 1e-9 * max(1.0, R)


def test_gibbs_logpdf_examples(gauss_tilt, laplace_tilt):
    assert gibbs_logpdf(gauss_tilt, 0.0) == pytest.approx(-0.5 * math.log(2 * math.pi), rel=1e-12)
    assert gibbs_logpdf(laplace_tilt, 0.0) == pytest.approx(-math.log(2.0), rel=1e-12)
    assert gibbs_logpdf(gauss_tilt, 1.0) == pytest.approx(-0.5 - 0.5 * math.log(2 * math.pi), rel=1e-12)
    np.testing.assert_allclose(gibbs_pdf(gauss_tilt, np.array([0.0, 1.0])), np.exp(-np.array([0.0, 0.5])) / math.sqrt(2 * math.pi))


def test_gibbs_moment_examples(gauss_tilt):
    M = gauss_tilt.M
    assert gibbs_moment(gauss_tilt, M) == pytest.approx(1.0, rel=1e-10)
    assert gibbs_moment(gauss_tilt, lambda x: M(x) ** 2, growth=(1.0, 2)) == pytest.approx(3.0, rel=1e-10)
    assert gibbs_moment(gauss_tilt, lambda x: np.ones_like(x)) == pytest.approx(1.0, rel=1e-10)


def test_moment_consistency_random_pairs():
    rng = np.random.default_rng(5)
    for _ in range(20):
        expr = BUILTINS[rng.integers(len(BUILTINS))]
        R = float(np.exp(rng.uniform(math.log(0.2), math.log(5.0))))
        t = solve_tilt(parse_orlicz(expr), R)
        m1 = gibbs_moment(t, t.M, growth=(1.0, 1))
        m2 = gibbs_moment(t, lambda x: t.M(x) ** 2, growth=(1.0, 2))
        assert m1 == pytest.approx(R, rel=1e-8)
        assert m2 - R * R == pytest.approx(t.sigma_sq, rel=1e-6)


def test_finite_difference_derivatives():
    rng = np.random.default_rng(11)
    for _ in range(10):
        M = parse_orlicz(BUILTINS[rng.integers(len(BUILTINS))])
        a = -float(np.exp(rng.uniform(-2, 2)))
        h = 1e-4 * abs(a)
        d1, d2 = phi_derivatives(M, a, 1e-13)
        p_plus, p0, p_minus = (phi(M, a + s * h, 1e-13) for s in (1, 0, -1))
        assert (p_plus - p_minus) / (2 * h) == pytest.approx(d1, rel=1e-6)
        assert (p_plus - 2 * p0 + p_minus) / h**2 == pytest.approx(d2, rel=1e-4)


@settings(max_examples=25, deadline=None)
@given(R1=st.floats(0.05, 20.0), R2=st.floats(0.05, 20.0))
def test_alpha_star_monotone_in_R(R1, R2):
    if abs(R1 - R2) < 1e-6 * max(R1, R2):
        return
    M = parse_orlicz("cosh(t)-1")
    lo, hi = sorted((R1, R2))
    assert solve_tilt(M, lo).alpha_star < solve_tilt(M, hi).alpha_star


def test_solve_tilt_rejects_bad_levels():
    for R in (0.0, -1.0, math.inf, math.nan):
        with pytest.raises(DomainError):
            solve_tilt(OrliczFunction.power(2.0), R)


def test_extreme_levels_still_bracketed():
    t = solve_tilt(OrliczFunction.power(2.0), 1e6)
    assert t.alpha_star == pytest.approx(-0.5e-6, rel=1e-9)
    t = solve_tilt(OrliczFunction.power(1.0), 1e-5)
    assert t.alpha_star == pytest.approx(-1e5, rel=1e-9)


def test_tilt_to_dict(gauss_tilt):
    d = gauss_tilt.to_dict()
    assert set(d) == {"M", "R", "alpha_star", "phi_at", "sigma_sq", "rate"}

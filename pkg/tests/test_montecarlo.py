import math

import numpy as np
import pytest
from scipy import stats

from orlicz.errors import DegenerateBatch, ResourceLimit
from orlicz.function import OrliczFunction, parse_orlicz
from orlicz.intersect import threshold_moment
from orlicz.montecarlo import (
    GibbsSampler,
    _alias_table,
    _rng,
    _weights,
    clt_diagnostic,
    draw_batch,
    estimate_intersection_ratio,
    estimate_log_volume,
    ks_null_band,
    marginal_diagnostic,
    resolve_threads,
    sample_gibbs,
)
from orlicz.tilt import solve_tilt
from orlicz.volume import exact_lp_log_volume

SQ = OrliczFunction.power(2.0)
AB = OrliczFunction.power(1.0)


def _mean_within(sample, want, k=3.0):
    se = sample.std(ddof=1) / math.sqrt(sample.size)
    return abs(sample.mean() - want) <= k * se


def test_sampler_gaussian_moments(gauss_tilt):
    z = sample_gibbs(gauss_tilt, 10**6, seed=0)
    assert z.size == 10**6
    assert _mean_within(z * z, 1.0)
    assert _mean_within(z, 0.0)


def test_sampler_laplace_tail(laplace_tilt):
    z = sample_gibbs(laplace_tilt, 10**6, seed=0)
    assert _mean_within((np.abs(z) > 2).astype(float), math.exp(-2))


@pytest.mark.parametrize("expr, R", [("abs(t)^1.5", 0.7), ("cosh(t)-1", 2.0), ("abs(t)^4", 1.0), ("t^2", 50.0)])
def test_sampler_matches_cdf(expr, R):
    t = solve_tilt(parse_orlicz(expr), R)
    z = sample_gibbs(t, 20000, seed=3)
    assert _mean_within(t.M(z), R, k=4.0)
    # KS against the Gibbs CDF built by quadrature
    from orlicz.numerics import integrate_interval
    from orlicz.tilt import gibbs_pdf

    pdf = lambda x: gibbs_pdf(t, x)
    cdf = lambda x: 0.5 + math.copysign(integrate_interval(pdf, 0.0, abs(x), 1e-10), x)
    grid = np.quantile(z, np.linspace(0.01, 0.99, 41))
    emp = np.searchsorted(np.sort(z), grid, side="right") / z.size
    assert np.max(np.abs(emp - [cdf(g) for g in grid])) < 1.63 / math.sqrt(z.size) * 1.5


def test_sampler_envelope_is_valid():
    for expr in ("abs(t)", "t^2", "abs(t)^1.5 + 0.5*abs(t)^3", "exp(abs(t))-1-abs(t)"):
        t = solve_tilt(parse_orlicz(expr), 1.0)
        s = GibbsSampler(t)
        assert 0.0 < s.acceptance <= 1.0
        assert s.acceptance > 0.9
        # envelope dominates the density inside each bulk cell
        x = s.left[:-1, None] + np.linspace(0, 1, 9)[None, :] * s.width[:-1, None]
        assert np.all(t.alpha_star * t.M(x) <= s.g_left[:-1, None] + 1e-12)
        xt = s.a + np.linspace(0.0, 50.0, 200) * t.scale
        assert np.all(t.alpha_star * t.M(xt) <= s.g_left[-1] - s.lam * (xt - s.a) + 1e-12)


def test_alias_table_reproduces_distribution():
    prob = np.array([0.1, 0.5, 0.05, 0.35])
    keep, alias = _alias_table(prob)
    K = prob.size
    # slot i keeps itself with prob keep[i] and hands the rest to alias[i]
    recon = keep / K
    np.add.at(recon, alias, (1.0 - keep) / K)
    np.testing.assert_allclose(recon, prob, atol=1e-15)


def test_sampler_deterministic(gauss_tilt):
    a = sample_gibbs(gauss_tilt, 5000, seed=9)
    b = sample_gibbs(gauss_tilt, 5000, seed=9)
    c = sample_gibbs(gauss_tilt, 5000, seed=10)
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    with pytest.raises(ValueError):
        sample_gibbs(gauss_tilt, 0)
    with pytest.raises(ValueError):
        sample_gibbs(gauss_tilt, 10, seed=-1)


def test_rng_streams_independent():
    assert _rng(1, 0).random() != _rng(1, 1).random()
    assert _rng(1, 0).random() == _rng(1, 0).random()


def test_resolve_threads(monkeypatch):
    assert resolve_threads(3) == 3
    monkeypatch.setenv("ORLICZ_THREADS", "5")
    assert resolve_threads() == 5
    monkeypatch.delenv("ORLICZ_THREADS")
    assert resolve_threads() >= 1
    with pytest.raises(ValueError):
        resolve_threads(0)


def test_draw_batch_consistent(gauss_tilt):
    b = draw_batch(SQ, 1.0, 7, 300, seed=4, tilt=gauss_tilt)
    assert b.coordinates.shape == (300, 7)
    np.testing.assert_allclose(b.partial_sums, np.sum(b.coordinates**2 - 1.0, axis=1), rtol=1e-12, atol=1e-12)
    with pytest.raises(ResourceLimit):
        draw_batch(SQ, 1.0, 1000, 10**6)


def test_weights_bounded():
    S = np.array([-3.0, -0.1, 0.0, 0.2, 5.0])
    w = _weights(-0.5, S)
    assert np.all((w >= 0) & (w <= 1))
    assert w[0] == pytest.approx(math.exp(-1.5)) and w[2] == 1.0 and w[3] == 0.0


def test_log_volume_d1_interval():
    est = estimate_log_volume(SQ, 1.0, 1, 10**6, seed=0)
    assert abs(est.point - math.log(2.0)) <= 3 * est.std_err
    assert 0 < est.n_effective <= est.n


@pytest.mark.parametrize("p, d", [(2.0, 10), (1.0, 10), (2.0, 50)])
def test_log_volume_matches_oracle(p, d):
    est = estimate_log_volume(OrliczFunction.power(p), 1.0, d, 2 * 10**5, seed=1)
    assert abs(est.point - exact_lp_log_volume(p, 1.0, d)) <= 3.5 * est.std_err
    assert est.std_err < 0.05


def test_log_volume_z_scores_calibrated():
    # the standard error should describe the seed-to-seed spread
    exact = exact_lp_log_volume(1, 1, 20)
    z = []
    for seed in range(200):
        est = estimate_log_volume(AB, 1.0, 20, 20000, seed=seed, threads=1)
        z.append((est.point - exact) / est.std_err)
    z = np.array(z)
    assert 0.85 <= z.std() <= 1.15
    assert abs(z.mean()) < 0.3
    assert np.mean(np.abs(z) > 3) <= 0.02


def test_log_volume_deterministic_across_threads():
    a = estimate_log_volume(AB, 1.0, 20, 3 * 10**5, seed=5, threads=1)
    b = estimate_log_volume(AB, 1.0, 20, 3 * 10**5, seed=5, threads=4)
    assert a == b
    assert a != estimate_log_volume(AB, 1.0, 20, 3 * 10**5, seed=6, threads=1)


def test_resource_cap_and_degenerate_batch():
    with pytest.raises(ResourceLimit):
        estimate_log_volume(SQ, 1.0, 1000, 10**7)
    assert estimate_log_volume(SQ, 1.0, 10, 100, max_draws=1000).n == 100
    with pytest.raises(ResourceLimit):
        estimate_log_volume(SQ, 1.0, 10, 101, max_draws=1000)
    with pytest.raises(DegenerateBatch):
        # a single draw misses {Z^2 <= 1} about a third of the time
        for seed in range(200):
            estimate_log_volume(SQ, 1.0, 1, 1, seed=seed)


def test_mc_estimate_to_dict():
    est = estimate_log_volume(SQ, 1.0, 3, 1000, seed=0)
    assert set(est.to_dict()) == {"point", "std_err", "n_effective", "n", "seed"}


def test_intersection_regimes():
    one = estimate_intersection_ratio(SQ, 1.0, SQ, 2.0, 100, 10**5, seed=0)
    zero = estimate_intersection_ratio(SQ, 1.0, SQ, 0.5, 100, 10**5, seed=0)
    assert one.point >= 0.99 and zero.point <= 0.01
    assert 0.0 <= zero.point <= one.point <= 1.0


def test_intersection_identical_balls_is_one():
    # with M1 = M2 and R1 = R2 the gate coincides with the ball itself
    est = estimate_intersection_ratio(SQ, 1.0, SQ, 1.0, 100, 10**4, seed=0)
    assert est.point == 1.0


def test_intersection_critical_band():
    m2 = threshold_moment(SQ, 1.0, AB)
    est = estimate_intersection_ratio(SQ, 1.0, AB, m2, 100, 10**5, seed=0)
    assert 0.05 < est.point < 0.95
    assert est.std_err > 0


def test_intersection_matches_direct_count():
    # compare with the plain weighted count on a materialized batch
    tilt = solve_tilt(SQ, 1.0)
    b = draw_batch(SQ, 1.0, 30, 20000, seed=2, tilt=tilt)
    w = _weights(tilt.alpha_star, b.partial_sums)
    m2 = threshold_moment(SQ, 1.0, AB)
    R2 = 0.85
    gate = np.sum(np.abs(b.coordinates) - m2, axis=1) <= 30 * (R2 - m2)
    est = estimate_intersection_ratio(SQ, 1.0, AB, R2, 30, 20000, seed=2, tilt=tilt)
    assert est.point == pytest.approx(np.sum(w * gate) / np.sum(w), rel=1e-12)


def test_marginal_examples():
    tv100 = marginal_diagnostic(SQ, 1.0, 100, 2 * 10**5, seed=0)
    tv2 = marginal_diagnostic(SQ, 1.0, 2, 2 * 10**5, seed=0)
    assert tv100 < 0.05 and tv2 > 2 * tv100
    assert marginal_diagnostic(AB, 1.0, 100, 2 * 10**5, seed=0) < 0.05
    full = marginal_diagnostic(SQ, 1.0, 100, 10**4, seed=0, full_output=True)
    assert full.empirical.size == 50 and full.edges.size == 51
    assert math.fsum(full.predicted) + full.outside_predicted == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(ValueError):
        marginal_diagnostic(SQ, 1.0, 100, 100, bins=5)


def test_marginal_d2_semicircle():
    # the first coordinate of a uniform point in the disk of radius sqrt(2)
    full = marginal_diagnostic(SQ, 1.0, 2, 2 * 10**5, seed=1, full_output=True)
    r = math.sqrt(2.0)
    F = lambda x: 0.0 if x <= -r else 1.0 if x >= r else 0.5 + (x * math.sqrt(r * r - x * x) + r * r * math.asin(x / r)) / (math.pi * r * r)
    want = np.diff([F(e) for e in full.edges])
    assert np.max(np.abs(full.empirical - want)) < 0.005


def test_clt_examples():
    n = 10**4
    band = ks_null_band(n)
    assert band == pytest.approx(1.95 / 100 * 1.5)
    assert clt_diagnostic(SQ, 1.0, 400, n, seed=0) < band
    assert clt_diagnostic(SQ, 1.0, 1, n, seed=0) > 3 * band
    assert clt_diagnostic(AB, 1.0, 400, n, seed=0) < band
    with pytest.raises(ValueError):
        clt_diagnostic(SQ, 1.0, 10, 999)


def test_clt_statistic_agrees_with_scipy():
    tilt = solve_tilt(SQ, 1.0)
    b = draw_batch(SQ, 1.0, 50, 2000, seed=8, tilt=tilt)
    want = stats.kstest(b.partial_sums / math.sqrt(50), "norm", args=(0.0, math.sqrt(2.0))).statistic
    assert clt_diagnostic(SQ, 1.0, 50, 2000, seed=8, tilt=tilt) == pytest.approx(want, rel=1e-15)

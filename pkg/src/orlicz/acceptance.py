"""Oracle and property checks, one function per acceptance criterion.

Each ``check_k`` returns a :class:`CheckResult`; nothing here asserts, so
callers decide how to report. Criteria 6 to 9 are Monte Carlo runs and
take from seconds to a few minutes on one core.
"""

from __future__ import annotations

import contextlib
import io
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .errors import NotOrlicz
from .function import OrliczFunction, parse_orlicz
from .intersect import ss_constant, ss_threshold_via_gibbs
from .montecarlo import (
    clt_diagnostic,
    estimate_intersection_ratio,
    estimate_log_volume,
    ks_null_band,
    marginal_diagnostic,
)
from .ratio import asymptotic_volume_ratio, lp_finite_volume_ratio
from .tilt import solve_tilt
from .volume import ball_contains, exact_lp_log_volume, log_volume_rate, luxemburg_norm, precise_log_volume


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    data: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.number:2d} {self.name}: {self.detail} ({self.seconds:.1f}s)"

    def to_dict(self) -> dict:
        return {"number": self.number, "name": self.name, "passed": self.passed, "detail": self.detail}


def _strictly_decreasing(xs) -> bool:
    return all(b < a for a, b in zip(xs, xs[1:]))


def lp_tilt_closed_form(p: float, R: float) -> tuple[float, float, float]:
    """``(alpha_*, sigma_*^2, rate)`` for ``M = |t|^p``."""
    alpha = -1.0 / (p * R)
    rate = math.log(2.0) + float(gammaln(1.0 + 1.0 / p)) + (1.0 + math.log(p * R)) / p
    return alpha, p * R * R, rate


def check_1() -> CheckResult:
    worst, ok = 0.0, True
    for p in (1.0, 1.5, 2.0, 3.0):
        for R in (0.5, 1.0, 2.0):
            rate = log_volume_rate(OrliczFunction.power(p), R)
            gaps = [abs(exact_lp_log_volume(p, R, d) / d - rate) for d in (100, 1000, 10000)]
            ok &= gaps[-1] < 1e-3 and _strictly_decreasing(gaps)
            worst = max(worst, gaps[-1])
    return CheckResult(1, "lp rate oracle", ok, f"max gap at d=1e4 {worst:.3g} (< 1e-3, decreasing in d)")


def check_2() -> CheckResult:
    worst, ok = 0.0, True
    for p in (1.0, 2.0, 4.0):
        tilt = solve_tilt(OrliczFunction.power(p), 1.0)
        gaps = [
            abs(exact_lp_log_volume(p, 1.0, d) - precise_log_volume(tilt.M, 1.0, d, tilt).total_log)
            for d in (125, 250, 500, 1000)
        ]
        ok &= gaps[-1] < 0.02 and _strictly_decreasing(gaps)
        worst = max(worst, gaps[-1])
    return CheckResult(2, "lp prefactor oracle", ok, f"max gap at d=1000 {worst:.3g} (< 0.02, decreasing in d)")


def check_3() -> CheckResult:
    worst = 0.0
    for p in (1.0, 1.5, 2.0, 3.0, 4.0):
        for R in (0.5, 1.0, 2.0):
            t = solve_tilt(OrliczFunction.power(p), R)
            for got, want in zip((t.alpha_star, t.sigma_sq, t.rate), lp_tilt_closed_form(p, R)):
                worst = max(worst, abs(got - want) / abs(want))
    return CheckResult(3, "closed-form tilt", worst < 1e-9, f"max relative error {worst:.3g} over 15 (p,R) (< 1e-9)")


def check_4() -> CheckResult:
    grid = (1.0, 1.5, 2.0, 3.0, 4.0)
    worst = max(abs(ss_threshold_via_gibbs(p, q) * ss_constant(p, q) - 1.0) for p in grid for q in grid)
    diagonal = max(abs(ss_constant(p, p) - 1.0) for p in grid)
    ok = worst <= 1e-6 and diagonal == 0.0
    return CheckResult(4, "lp/lq threshold bridge", ok, f"max |t*A - 1| {worst:.3g} (<= 1e-6), max |A_pp - 1| {diagonal:.3g}")


def check_5() -> CheckResult:
    vr2 = asymptotic_volume_ratio(OrliczFunction.power(2.0)).vr_limit
    vr1 = asymptotic_volume_ratio(OrliczFunction.power(1.0)).vr_limit
    target = math.sqrt(2.0 * math.e / math.pi)
    finite = [lp_finite_volume_ratio(1.0, d) for d in (10, 100, 1000)]
    gaps = [abs(v / target - 1.0) for v in finite]
    ok = abs(vr2 - 1.0) < 1e-8 and abs(vr1 - target) < 1e-8 and gaps[-1] < 0.01 and _strictly_decreasing(gaps)
    detail = f"|vr(t^2)-1| {abs(vr2 - 1):.2g}, |vr(|t|)-sqrt(2e/pi)| {abs(vr1 - target):.2g}, d=1000 gap {gaps[-1]:.2%}"
    return CheckResult(5, "volume ratio", ok, detail)


def check_6(n: int = 10**6, seeds: int = 20) -> CheckResult:
    ok, parts, data = True, [], {}
    for p, d in ((2.0, 50), (1.0, 20)):
        M = OrliczFunction.power(p)
        tilt = solve_tilt(M, 1.0)
        exact = exact_lp_log_volume(p, 1.0, d)
        z = [
            (e.point - exact) / e.std_err
            for e in (estimate_log_volume(M, 1.0, d, n, s, tilt=tilt) for s in range(seeds))
        ]
        hits = sum(abs(v) <= 3.0 for v in z)
        need = math.ceil(0.95 * seeds)
        ok &= abs(z[0]) <= 3.0 and hits >= need
        parts.append(f"(p={p:g},d={d}) seed0 z={z[0]:+.2f}, {hits}/{seeds} within 3se")
        data[f"p={p:g},d={d}"] = z
    return CheckResult(6, "Monte Carlo volume", ok, "; ".join(parts), data=data)


def check_7(n: int = 10**5) -> CheckResult:
    M = OrliczFunction.power(2.0)
    tilt = solve_tilt(M, 1.0)
    dims = (50, 100, 200)
    low = [estimate_intersection_ratio(M, 1.0, M, 0.8, d, n, 0, tilt=tilt).point for d in dims]
    high = [estimate_intersection_ratio(M, 1.0, M, 1.25, d, n, 0, tilt=tilt).point for d in dims]
    dist_low = low
    dist_high = [1.0 - v for v in high]
    # exp(-c d) decay: log-distance drops at least as much at each doubling
    steps = [b / a for a, b in zip(dist_low, dist_low[1:])] if all(v > 0 for v in dist_low) else [1.0]
    geometric = _strictly_decreasing(dist_low) and all(s < 1.0 for s in steps) and _strictly_decreasing(steps)
    high_ok = all(b <= a for a, b in zip(dist_high, dist_high[1:]))
    ok = low[-1] <= 0.01 and high[-1] >= 0.99 and geometric and high_ok
    detail = (
        f"d=200 ratio {low[-1]:.3g} at R2=0.8, {high[-1]:.6g} at R2=1.25; "
        f"ZERO-side distances {', '.join(f'{v:.3g}' for v in dist_low)}"
    )
    return CheckResult(7, "empirical dichotomy", ok, detail)


def check_8(n: int = 10**6) -> CheckResult:
    M = OrliczFunction.power(2.0)
    tilt = solve_tilt(M, 1.0)
    tv100 = marginal_diagnostic(M, 1.0, 100, n, 50, 0, tilt=tilt)
    tv2 = marginal_diagnostic(M, 1.0, 2, n, 50, 0, tilt=tilt)
    return CheckResult(8, "max-entropy marginal", tv100 < 0.05 and tv100 < tv2, f"TV {tv100:.4f} at d=100, {tv2:.4f} at d=2")


def check_9(n: int = 10**4) -> CheckResult:
    M = OrliczFunction.power(2.0)
    tilt = solve_tilt(M, 1.0)
    band = ks_null_band(n)
    ks400 = clt_diagnostic(M, 1.0, 400, n, 0, tilt=tilt)
    ks1 = clt_diagnostic(M, 1.0, 1, n, 0, tilt=tilt)
    return CheckResult(9, "CLT diagnostic", ks400 < band < ks1, f"KS {ks400:.4f} at d=400, {ks1:.4f} at d=1, band {band:.4f}")


def _norm_sum_equivalence(rng: np.random.Generator) -> bool:
    funcs = [OrliczFunction.power(p) for p in (1.0, 1.5, 2.0, 4.0)] + [
        parse_orlicz("cosh(t) - 1"),
        parse_orlicz("exp(abs(t)) - 1 - abs(t)"),
    ]
    for i in range(1000):
        M = funcs[i % len(funcs)]
        d = int(rng.integers(1, 9))
        x = rng.standard_normal(d) * rng.uniform(0.05, 2.0)
        norm = luxemburg_norm(M, x)
        inside = ball_contains(M, 1.0, x)
        # skip vectors within rounding of the unit sphere
        if abs(norm - 1.0) < 1e-9:
            continue
        if (norm <= 1.0) != inside:
            return False
    return True


def _parser_rejections() -> bool:
    try:
        parse_orlicz("abs(t)^0.5")
        return False
    except NotOrlicz as e:
        v = e.report.get("convexity")
        if v is None or v.witness is None:
            return False
    for odd in ("t", "t^3", "t + t^2"):
        try:
            parse_orlicz(odd)
            return False
        except NotOrlicz as e:
            if e.report.get("evenness") is None:
                return False
    return True


def _scaling_covariance() -> bool:
    rng = np.random.default_rng(7)
    for expr in ("abs(t)^1.5", "cosh(t) - 1"):
        M = parse_orlicz(expr)
        for s in (0.5, 2.0, 7.0):
            Ms = M.scaled(s)
            if abs(log_volume_rate(Ms, 1.0) - log_volume_rate(M, 1.0) - math.log(s)) > 1e-9:
                return False
            x = rng.standard_normal(5)
            if abs(luxemburg_norm(Ms, x) * s - luxemburg_norm(M, x)) > 1e-9 * luxemburg_norm(M, x):
                return False
    return True


SEEDED_COMMANDS = [
    ["sample", "--M", "abs(t)^2", "--R", "1", "--n", "2000", "--raw"],
    ["mc-volume", "--M", "abs(t)", "--R", "1", "--d", "20", "--n", "20000", "--threads", "1"],
    ["mc-intersect", "--M1", "abs(t)^2", "--R1", "1", "--M2", "abs(t)", "--R2", "0.8", "--d", "50", "--n", "20000"],
    ["diag-marginal", "--M", "abs(t)^2", "--R", "1", "--d", "20", "--n", "20000"],
    ["diag-clt", "--M", "abs(t)^2", "--R", "1", "--d", "50", "--n", "2000"],
]


def _run_cli(argv: list[str]) -> tuple[int, str]:
    from .cli import main

    buf = io.StringIO()
    with contextlib.redirect_stdout(buf), contextlib.redirect_stderr(io.StringIO()):
        code = main(argv)
    return code, buf.getvalue()


def _bit_identical_reruns() -> bool:
    for argv in SEEDED_COMMANDS:
        first = _run_cli(argv + ["--seed", "11"])
        if first[0] != 0 or first != _run_cli(argv + ["--seed", "11"]):
            return False
    # the worker count must not change results
    base = ["mc-volume", "--M", "abs(t)^2", "--R", "1", "--d", "10", "--n", "300000"]
    return _run_cli(base + ["--threads", "1"]) == _run_cli(base + ["--threads", "4"])


def check_10() -> CheckResult:
    parts = {
        "norm/sum equivalence": _norm_sum_equivalence(np.random.default_rng(2024)),
        "parser rejections": _parser_rejections(),
        "scaling covariance": _scaling_covariance(),
        "bit-identical reruns": _bit_identical_reruns(),
    }
    failed = [k for k, v in parts.items() if not v]
    detail = "all structural suites pass" if not failed else "failed: " + ", ".join(failed)
    return CheckResult(10, "structural suites", not failed, detail, data=parts)


CHECKS: dict[int, Callable[[], CheckResult]] = {
    1: check_1,
    2: check_2,
    3: check_3,
    4: check_4,
    5: check_5,
    6: check_6,
    7: check_7,
    8: check_8,
    9: check_9,
    10: check_10,
}
MONTE_CARLO = (6, 7, 8, 9)


def run_check(k: int) -> CheckResult:
    t0 = time.perf_counter()
    result = CHECKS[k]()
    result.seconds = time.perf_counter() - t0
    return result


def run_all(skip_mc: bool = False) -> list[CheckResult]:
    return [run_check(k) for k in CHECKS if not (skip_mc and k in MONTE_CARLO)]

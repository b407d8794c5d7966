"""Monte Carlo checks of the asymptotics through exponential tilting.

With ``Z_1..Z_d`` i.i.d. from the Gibbs density of ``(M, R)`` and
``S = sum (M(Z_i) - R)``,

    vol B_M^d(dR) = exp(d * rate) * E[1{S <= 0} exp(-alpha_* S)].

Since ``alpha_* < 0`` the weight is at most 1, so the plain sample mean
is a bounded estimator.

Sampling is chunked. Chunk ``c`` of a run with seed ``s`` draws from a
Philox stream keyed by ``SeedSequence(s, spawn_key=(c,))``, and the chunk
layout depends only on ``(n, d)``. Results are therefore bit-identical
for any worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import stats

from .errors import DegenerateBatch, DomainError, ResourceLimit
from .function import OrliczFunction
from .numerics import integrate_interval
from .tilt import GibbsTilt, gibbs_moment, gibbs_pdf, moment_witness, solve_tilt

MAX_COORDINATE_DRAWS = 10**9
CHUNK_COORDINATES = 2**21
TAIL_SLOT_MASS = 1e-4
BULK_CELLS = 1024
LAYOUT_POINTS = 2**14


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(stream,))))


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit nonnegative integer, got {seed}")
    return seed


def resolve_threads(threads: Optional[int] = None) -> int:
    """Explicit value, else ``ORLICZ_THREADS``, else the CPU count."""
    if threads is None:
        env = os.environ.get("ORLICZ_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    if threads < 1:
        raise ValueError("threads must be at least 1")
    return int(threads)


# --------------------------------------------------------------------------
# Sampler


def _alias_table(prob: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vose alias table for a discrete distribution."""
    K = prob.size
    scaled = prob * (K / prob.sum())
    keep = np.ones(K)
    alias = np.arange(K)
    small = [i for i in range(K) if scaled[i] < 1.0]
    large = [i for i in range(K) if scaled[i] >= 1.0]
    while small and large:
        s, l = small.pop(), large.pop()
        keep[s] = scaled[s]
        alias[s] = l
        scaled[l] -= 1.0 - scaled[s]
        (small if scaled[l] < 1.0 else large).append(l)
    return keep, alias


class GibbsSampler:
    """Exact rejection sampler for ``p(x) ∝ exp(alpha_* M(x))``.

    The envelope of ``|X|`` is piecewise constant on ``[0, a)`` and
    exponential beyond ``a``, where ``a`` cuts off about ``1e-4`` of the
    mass. ``log p`` is concave, so each cell's left-endpoint height bounds
    the density on that cell. For the same reason the line through the
    last bulk chord bounds it on ``[a, inf)``. Cells come from a layout
    table that balances mass against the drop in ``log p``. They are
    chosen through an alias table weighted by envelope mass. No truncation
    is involved.
    """

    def __init__(self, tilt: GibbsTilt, cells: int = BULK_CELLS):
        self.tilt = tilt
        self.alpha = tilt.alpha_star
        M, alpha = tilt.M, tilt.alpha_star
        T = moment_witness(alpha, tilt.scale).cutoff(1e-8 * math.exp(tilt.phi_at))

        # layout only; exactness comes from the rejection step
        xs = np.linspace(0.0, T, LAYOUT_POINTS)
        g = alpha * M(xs)
        dens = np.exp(g)
        F = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(xs))])
        a = float(np.interp((1.0 - TAIL_SLOT_MASS) * F[-1], F, xs))
        inside = xs <= a
        xs_b, F_b, g_b = xs[inside], F[inside], g[inside]
        Q = F_b / F_b[-1] + (g_b[0] - g_b) / max(g_b[0] - g_b[-1], 1e-300)
        edges = np.interp(np.linspace(0.0, Q[-1], cells + 1), Q, xs_b)
        edges[-1] = a
        edges = np.unique(edges)

        left = edges[:-1]
        width = np.diff(edges)
        g_left = alpha * M(left)
        g_a = alpha * float(M(np.array([a]))[0])
        lam = (g_left[-1] - g_a) / width[-1]
        if not (lam > 0 and math.isfinite(lam)):
            raise DomainError(f"Gibbs density of {M.label} is not strictly decreasing near {a:g}")

        self.left = np.append(left, a)
        self.width = np.append(width, 0.0)
        self.g_left = np.append(g_left, g_a)
        self.tail_index = left.size
        self.a = a
        self.lam = lam
        env_mass = np.append(np.exp(g_left) * width, math.exp(g_a) / lam)
        self.keep, self.alias = _alias_table(env_mass)
        self.slots = env_mass.size
        total = 2.0 * env_mass.sum()
        self.acceptance = math.exp(tilt.phi_at) / total

    def _candidates(self, rng: np.random.Generator, m: int):
        u = rng.random((3, m))
        slot = u[0] * self.slots
        k = slot.astype(np.intp)
        k = np.where(slot - k < self.keep[k], k, self.alias[k])
        s = 2.0 * u[1]
        neg = s >= 1.0
        f = s - neg
        tail = k == self.tail_index
        x = self.left[k] + f * self.width[k]
        x = np.where(tail, self.a - np.log1p(-f) / self.lam, x)
        m_x = self.tilt.M(x)
        log_env = self.g_left[k] - np.where(tail, self.lam * (x - self.a), 0.0)
        ok = u[2] < np.exp(self.alpha * m_x - log_env)
        x = np.where(neg, -x, x)
        return x[ok], m_x[ok]

    def draw(self, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
        """``n`` draws and their ``M`` values."""
        xs, ms, have = [], [], 0
        while have < n:
            want = n - have
            x, m = self._candidates(rng, int(want / self.acceptance * 1.02) + 16)
            xs.append(x[:want])
            ms.append(m[:want])
            have += min(want, x.size)
        if len(xs) == 1:
            return xs[0], ms[0]
        return np.concatenate(xs), np.concatenate(ms)


def sample_gibbs(tilt: GibbsTilt, n: int, seed: int = 0) -> np.ndarray:
    """``n`` i.i.d. draws from the Gibbs density of ``tilt``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    seed = _check_seed(seed)
    sampler = GibbsSampler(tilt)
    out = [sampler.draw(_rng(seed, c), min(CHUNK_COORDINATES, n - lo))[0]
           for c, lo in enumerate(range(0, n, CHUNK_COORDINATES))]
    return np.concatenate(out)


# --------------------------------------------------------------------------
# Batches and chunked reduction


@dataclass(frozen=True)
class SampleBatch:
    d: int
    n: int
    seed: int
    coordinates: np.ndarray
    partial_sums: np.ndarray


@dataclass(frozen=True)
class McEstimate:
    point: float
    std_err: float
    n_effective: float
    n: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "point": self.point,
            "std_err": self.std_err,
            "n_effective": self.n_effective,
            "n": self.n,
            "seed": self.seed,
        }


def _chunk_rows(d: int) -> int:
    return max(1, CHUNK_COORDINATES // d)


def _check_budget(n: int, d: int, max_draws: Optional[int]) -> None:
    if n < 1 or d < 1:
        raise ValueError("n and d must be at least 1")
    cap = MAX_COORDINATE_DRAWS if max_draws is None else max_draws
    if n * d > cap:
        raise ResourceLimit(f"n*d = {n * d} exceeds the draw budget {cap}; raise max_draws to run it")


def _run_chunks(
    tilt: GibbsTilt,
    n: int,
    d: int,
    seed: int,
    reduce: Callable[[np.ndarray, np.ndarray], np.ndarray],
    threads: Optional[int],
) -> list[np.ndarray]:
    """Apply ``reduce(coordinates, m_values)`` to every chunk, in chunk order."""
    seed = _check_seed(seed)
    sampler = GibbsSampler(tilt)
    rows = _chunk_rows(d)
    starts = list(range(0, n, rows))

    def work(c: int) -> np.ndarray:
        r = min(rows, n - starts[c])
        x, m = sampler.draw(_rng(seed, c), r * d)
        return reduce(x.reshape(r, d), m.reshape(r, d))

    workers = min(resolve_threads(threads), len(starts))
    if workers == 1:
        return [work(c) for c in range(len(starts))]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(work, range(len(starts))))


def _fsum_columns(parts: list[np.ndarray]) -> np.ndarray:
    stacked = np.stack(parts)
    return np.array([math.fsum(col) for col in stacked.T])


def draw_batch(
    M: OrliczFunction, R: float, d: int, n: int, seed: int = 0, tilt: Optional[GibbsTilt] = None
) -> SampleBatch:
    """Materialize ``n`` Gibbs vectors of length ``d`` (the estimators' exact samples)."""
    _check_budget(n, d, 10**8)
    tilt = tilt or solve_tilt(M, R)
    parts = _run_chunks(tilt, n, d, seed, lambda x, m: (x, np.sum(m - tilt.R, axis=1)), threads=1)
    x = np.concatenate([p[0] for p in parts])
    s = np.concatenate([p[1] for p in parts])
    return SampleBatch(d, n, int(seed), x, s)


def _log_weights_ok(w: np.ndarray) -> None:
    if not (np.all(w >= 0.0) and np.all(w <= 1.0)):
        raise AssertionError("importance weight outside [0, 1]")


def _weights(alpha: float, S: np.ndarray) -> np.ndarray:
    w = np.where(S <= 0.0, np.exp(np.minimum(-alpha * S, 0.0)), 0.0)
    _log_weights_ok(w)
    return w


# --------------------------------------------------------------------------
# Estimators


def estimate_log_volume(
    M: OrliczFunction,
    R: float,
    d: int,
    n: int,
    seed: int = 0,
    *,
    tilt: Optional[GibbsTilt] = None,
    threads: Optional[int] = None,
    max_draws: Optional[int] = None,
) -> McEstimate:
    """Tilted estimate of ``log vol B_M^d(dR)`` with a delta-method error.

    Raises:
        DegenerateBatch: no sample fell in ``{S <= 0}``.
        ResourceLimit: ``n * d`` over the draw budget.
    """
    _check_budget(n, d, max_draws)
    tilt = tilt or solve_tilt(M, R)
    alpha = tilt.alpha_star

    def reduce(x, m):
        w = _weights(alpha, np.sum(m - tilt.R, axis=1))
        return np.array([np.sum(w), np.sum(w * w)])

    sw, sw2 = map(float, _fsum_columns(_run_chunks(tilt, n, d, seed, reduce, threads)))
    if sw == 0.0:
        raise DegenerateBatch(f"no sample in the ball at d={d}, n={n}; increase n")
    mean = sw / n
    var = max(sw2 / n - mean * mean, 0.0)
    se = math.sqrt(var / n) / mean
    return McEstimate(d * tilt.rate + math.log(mean), se, sw * sw / sw2, n, int(seed))


def estimate_intersection_ratio(
    M1: OrliczFunction,
    R1: float,
    M2: OrliczFunction,
    R2: float,
    d: int,
    n: int,
    seed: int = 0,
    *,
    tilt: Optional[GibbsTilt] = None,
    threads: Optional[int] = None,
    max_draws: Optional[int] = None,
) -> McEstimate:
    """Estimate ``vol(B_{M1}(dR1) ∩ B_{M2}(dR2)) / vol(B_{M1}(dR1))``.

    The numerator adds the gate ``sum (M2(Z_i) - m2) <= d (R2 - m2)`` to the
    denominator's weight, with ``m2`` the threshold moment. The error is
    the delta-method error of a ratio of means.
    """
    _check_budget(n, d, max_draws)
    if not (R2 > 0):
        raise DomainError(f"R2 must be positive, got {R2}")
    tilt = tilt or solve_tilt(M1, R1)
    alpha = tilt.alpha_star
    m2 = gibbs_moment(tilt, M2)
    level = d * (R2 - m2)

    def reduce(x, m):
        w = _weights(alpha, np.sum(m - tilt.R, axis=1))
        gate = np.sum(M2(x) - m2, axis=1) <= level
        wg = np.where(gate, w, 0.0)
        return np.array([np.sum(w), np.sum(w * w), np.sum(wg), np.sum(wg * w)])

    sw, sw2, swg, sw2g = map(float, _fsum_columns(_run_chunks(tilt, n, d, seed, reduce, threads)))
    if sw == 0.0:
        raise DegenerateBatch(f"no sample in the first ball at d={d}, n={n}; increase n")
    r = swg / sw
    # residual w (g - r) has mean zero by construction
    resid_sq = (sw2g * (1.0 - 2.0 * r) + r * r * sw2) / n
    se = math.sqrt(max(resid_sq, 0.0) / n) / (sw / n)
    return McEstimate(min(max(r, 0.0), 1.0), se, sw * sw / sw2, n, int(seed))


@dataclass(frozen=True)
class MarginalDiagnostic:
    tv: float
    edges: np.ndarray
    empirical: np.ndarray
    predicted: np.ndarray
    outside_empirical: float
    outside_predicted: float


def marginal_diagnostic(
    M: OrliczFunction,
    R: float,
    d: int,
    n: int,
    bins: int = 50,
    seed: int = 0,
    *,
    tilt: Optional[GibbsTilt] = None,
    threads: Optional[int] = None,
    max_draws: Optional[int] = None,
    full_output: bool = False,
):
    """Total variation between the first-coordinate law of a uniform point in
    ``B_M^d(dR)`` and the Gibbs density, on ``bins`` equal bins.

    The uniform-in-ball marginal comes from reweighting tilted draws of
    ``Z_1``. Bins cover the central ``1 - 1e-3`` of the Gibbs law, and the
    remaining mass counts as one extra bin.
    """
    if bins < 10:
        raise ValueError("bins must be at least 10")
    _check_budget(n, d, max_draws)
    tilt = tilt or solve_tilt(M, R)
    alpha = tilt.alpha_star
    half = _central_half_width(tilt, 1e-3)
    edges = np.linspace(-half, half, bins + 1)

    def reduce(x, m):
        w = _weights(alpha, np.sum(m - tilt.R, axis=1))
        h, _ = np.histogram(x[:, 0], bins=edges, weights=w)
        return np.append(h, np.sum(w))

    sums = _fsum_columns(_run_chunks(tilt, n, d, seed, reduce, threads))
    total = sums[-1]
    if total == 0.0:
        raise DegenerateBatch(f"no sample in the ball at d={d}, n={n}; increase n")
    emp = sums[:-1] / total
    pdf = lambda t: gibbs_pdf(tilt, t)
    pred = np.array([integrate_interval(pdf, lo, hi, 1e-10) for lo, hi in zip(edges[:-1], edges[1:])])
    out_emp = max(1.0 - math.fsum(emp), 0.0)
    out_pred = max(1.0 - math.fsum(pred), 0.0)
    tv = 0.5 * (math.fsum(np.abs(emp - pred)) + abs(out_emp - out_pred))
    if full_output:
        return MarginalDiagnostic(tv, edges, emp, pred, out_emp, out_pred)
    return tv


def _central_half_width(tilt: GibbsTilt, tail: float) -> float:
    """``h`` with Gibbs mass of ``{|x| > h}`` equal to ``tail``, by bisection."""
    pdf = lambda t: gibbs_pdf(tilt, t)
    lo, hi = 0.0, tilt.scale
    while 2.0 * integrate_interval(pdf, hi, hi + 64.0 * tilt.scale, 1e-8) > tail:
        lo, hi = hi, 2.0 * hi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        mass = 1.0 - 2.0 * integrate_interval(pdf, 0.0, mid, 1e-10)
        if mass > tail:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def clt_diagnostic(
    M: OrliczFunction,
    R: float,
    d: int,
    n: int,
    seed: int = 0,
    *,
    tilt: Optional[GibbsTilt] = None,
    threads: Optional[int] = None,
) -> float:
    """KS distance between unweighted ``S / sqrt(d)`` and ``N(0, sigma_*^2)``."""
    if n < 1000:
        raise ValueError("n must be at least 1000")
    _check_budget(n, d, None)
    tilt = tilt or solve_tilt(M, R)
    parts = _run_chunks(tilt, n, d, seed, lambda x, m: np.sum(m - tilt.R, axis=1), threads)
    z = np.concatenate(parts) / math.sqrt(d)
    return float(stats.kstest(z, "norm", args=(0.0, math.sqrt(tilt.sigma_sq))).statistic)


def ks_null_band(n: int, slack: float = 0.5) -> float:
    """``1.95 / sqrt(n) * (1 + slack)``: a conservative KS acceptance level."""
    return 1.95 / math.sqrt(n) * (1.0 + slack)

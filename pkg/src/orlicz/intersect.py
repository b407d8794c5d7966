"""Zero/one limits for the volume fraction of ``B_{M1}(dR1)`` inside ``B_{M2}(dR2)``.

The fraction tends to 1 when the Gibbs mean of ``M2`` under the tilt of
``(M1, R1)`` is below ``R2``, and to 0 when it is above. Exactly at the
threshold nothing is decided here; such inputs get a ``CRITICAL`` verdict.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from scipy.special import gammaln

from .errors import DomainError
from .function import OrliczFunction
from .tilt import GibbsTilt, gibbs_moment, solve_tilt


class Verdict(str, enum.Enum):
    ZERO = "ZERO"
    ONE = "ONE"
    CRITICAL = "CRITICAL"


@dataclass(frozen=True)
class IntersectionVerdict:
    verdict: Verdict
    threshold_moment: float
    R2: float
    margin: float
    tol_band: float

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "threshold_moment": self.threshold_moment,
            "R2": self.R2,
            "margin": self.margin,
            "tol_band": self.tol_band,
        }


@dataclass(frozen=True)
class SweepRow:
    R2: float
    verdict: Verdict
    margin: float


@dataclass(frozen=True)
class PhaseSweep:
    rows: tuple[SweepRow, ...]
    threshold: Optional[float]
    threshold_moment: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["R2", "verdict", "margin"])
        for r in self.rows:
            writer.writerow([format(r.R2, ".17g"), r.verdict.value, format(r.margin, ".17g")])
        return buf.getvalue()


def threshold_moment(
    M1: OrliczFunction, R1: float, M2: OrliczFunction, tilt: Optional[GibbsTilt] = None
) -> float:
    """``int M2(x) p1(x) dx`` with ``p1`` the Gibbs density of ``(M1, R1)``.

    ``M2`` may grow faster than any power of ``M1`` (then the integral can
    diverge), so the tail is estimated from the integrand rather than from a
    declared growth bound.
    """
    if not (R1 > 0):
        raise DomainError(f"R1 must be positive, got {R1}")
    tilt = tilt or solve_tilt(M1, R1)
    return gibbs_moment(tilt, M2)


def _verdict(margin: float, band: float) -> Verdict:
    if margin < -band:
        return Verdict.ZERO
    if margin > band:
        return Verdict.ONE
    return Verdict.CRITICAL


def default_band(R2: float) -> float:
    return 1e-9 * max(1.0, R2)


def intersection_verdict(
    M1: OrliczFunction,
    R1: float,
    M2: OrliczFunction,
    R2: float,
    tol_band: Optional[float] = None,
    tilt: Optional[GibbsTilt] = None,
    moment: Optional[float] = None,
) -> IntersectionVerdict:
    """Limit of ``vol(B_{M1}(dR1) ∩ B_{M2}(dR2)) / vol(B_{M1}(dR1))``.

    ``margin = R2 - threshold_moment``; the verdict is ``ONE`` above the
    band, ``ZERO`` below it and ``CRITICAL`` inside it.
    """
    if not (R2 > 0):
        raise DomainError(f"R2 must be positive, got {R2}")
    band = default_band(R2) if tol_band is None else tol_band
    if band < 0:
        raise ValueError("tol_band must be nonnegative")
    m = threshold_moment(M1, R1, M2, tilt) if moment is None else moment
    margin = R2 - m
    return IntersectionVerdict(_verdict(margin, band), m, float(R2), margin, band)


def ss_constant(p: float, q: float) -> float:
    """Threshold constant ``A_{p,q}`` for ``D_p^d ∩ t D_q^d`` (``p = inf`` allowed)."""
    if not (q > 0) or math.isinf(q):
        raise DomainError(f"q must be positive and finite, got {q}")
    if not (p > 0):
        raise DomainError(f"p must be positive, got {p}")
    if math.isinf(p):
        return math.exp(-float(gammaln(1.0 + 1.0 / q)) + (1.0 / q) * math.log((q + 1.0) / (q * math.e)))
    log_a = (
        (1.0 + 1.0 / q) * float(gammaln(1.0 + 1.0 / p))
        - float(gammaln(1.0 + 1.0 / q))
        - float(gammaln((q + 1.0) / p)) / q
        + 1.0 / p - 1.0 / q
        + math.log(p / q) / q
    )
    return math.exp(log_a)


def normalized_level(p: float) -> float:
    """``R`` such that ``B_{|t|^p}(dR)`` has asymptotically unit volume.

    The volume-normalized ``l_p`` ball has radius ``r_d`` with
    ``r_d^p / d -> 1 / (p e (2 Gamma(1 + 1/p))^p)``.
    """
    return 1.0 / (p * math.e * (2.0 * math.gamma(1.0 + 1.0 / p)) ** p)


def ss_threshold_via_gibbs(p: float, q: float) -> float:
    """Critical ``t`` for ``D_p^d ∩ t D_q^d`` computed from the Gibbs moment.

    ``D_p`` corresponds to ``M1 = |t|^p`` at level ``normalized_level(p)``
    and ``t D_q`` to ``M2 = |t|^q`` at ``t^q normalized_level(q)``; the
    critical ``t`` equates that level with the threshold moment.
    """
    for name, v in (("p", p), ("q", q)):
        if not (v > 0) or math.isinf(v):
            raise DomainError(f"{name} must be positive and finite, got {v}")
    M1 = OrliczFunction.power(float(p))
    M2 = OrliczFunction.power(float(q))
    m = threshold_moment(M1, normalized_level(p), M2)
    return (m / normalized_level(q)) ** (1.0 / q)


def phase_sweep(
    M1: OrliczFunction,
    R1: float,
    M2: OrliczFunction,
    R2_grid: Sequence[float],
    tol_band: Optional[float] = None,
    rel_tol: float = 1e-10,
) -> PhaseSweep:
    """Verdicts along an increasing ``R2`` grid, plus the located threshold.

    The threshold is refined by bisection on the margin between the last
    ``ZERO`` and the first ``ONE`` grid point; ``threshold`` is ``None``
    when the grid does not straddle it.
    """
    grid = [float(r) for r in R2_grid]
    if not grid or any(r <= 0 for r in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("R2 grid must be positive and strictly increasing")
    tilt = solve_tilt(M1, R1)
    m = threshold_moment(M1, R1, M2, tilt)
    rows = []
    for r in grid:
        v = intersection_verdict(M1, R1, M2, r, tol_band, tilt=tilt, moment=m)
        rows.append(SweepRow(r, v.verdict, v.margin))

    zeros = [r.R2 for r in rows if r.verdict is Verdict.ZERO]
    ones = [r.R2 for r in rows if r.verdict is Verdict.ONE]
    threshold = None
    if zeros and ones:
        lo, hi = zeros[-1], ones[0]
        for _ in range(200):
            if hi - lo <= rel_tol * hi:
                break
            mid = 0.5 * (lo + hi)
            if mid - m < 0:
                lo = mid
            else:
                hi = mid
        threshold = 0.5 * (lo + hi)
    return PhaseSweep(tuple(rows), threshold, m)

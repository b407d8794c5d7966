"""Asymptotic volume ratio of ``B_M^d(d)`` for 2-concave ``M``.

When ``s -> M(sqrt(s))`` is concave the maximal inscribed ellipsoid is the
Euclidean ball of radius ``sqrt(d) M^{-1}(1)``, and combining its volume
with the precise volume asymptotics gives the limit
``exp(phi(alpha_*) - alpha_*) / (sqrt(2 pi e) M^{-1}(1))`` at ``R = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NotTwoConcave
from .function import DEFAULT_GRID, GridSpec, OrliczFunction, _relative_slack, inverse_at, midpoint_pairs
from .tilt import GibbsTilt, solve_tilt
from .volume import exact_lp_log_volume, log_euclidean_ball_volume

VR_SANITY_FLOOR = 1.0 - 1e-6


@dataclass(frozen=True)
class TwoConcavityReport:
    passed: bool
    witness: Optional[tuple[float, float, float]]
    residual: float
    grid_spec: str

    def __bool__(self) -> bool:
        return self.passed

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "witness": None if self.witness is None else list(self.witness),
            "residual": self.residual,
            "grid_spec": self.grid_spec,
        }


@dataclass(frozen=True)
class VolumeRatioResult:
    vr_limit: float
    alpha_star: float
    m_inv_one: float
    two_concave: TwoConcavityReport
    below_one: bool  # diagnostic: vr < 1 - 1e-6 means a non-2-concave M slipped through

    def to_dict(self) -> dict:
        return {
            "vr_limit": self.vr_limit,
            "alpha_star": self.alpha_star,
            "m_inv_one": self.m_inv_one,
            "two_concave": self.two_concave.to_dict(),
            "below_one_flag": self.below_one,
        }


def is_two_concave(M: OrliczFunction, grid: GridSpec = DEFAULT_GRID) -> TwoConcavityReport:
    """Midpoint-concavity of ``s -> M(sqrt(s))`` on a positive grid.

    The pair ``(1, 4)`` is tried first, then consecutive and random grid
    pairs; the first violating triple ``(a, b, midpoint)`` is the witness.
    """
    pts = grid.positive()
    a, b = midpoint_pairs(pts, [(1.0, 4.0), (0.0, 1.0)], grid.n_pairs, grid.seed)
    mid = 0.5 * (a + b)

    def h(s):
        return M(np.sqrt(s))

    with np.errstate(invalid="ignore", over="ignore"):
        ha, hb, hm = h(a), h(b), h(mid)
        avg = 0.5 * (ha + hb)
        deficit = avg - hm
        overflow = np.isinf(hm) & (hm == avg)
        bad = ~overflow & ((deficit > _relative_slack(ha, hb)) | np.isnan(deficit))
    idx = np.flatnonzero(bad)
    desc = f"s -> M(sqrt(s)) on {grid.n_log} log-spaced s in [{grid.lo:g}, {grid.hi:g}] plus {grid.n_pairs} random pairs"
    if idx.size == 0:
        return TwoConcavityReport(True, None, 0.0, desc)
    k = int(idx[0])
    return TwoConcavityReport(False, (float(a[k]), float(b[k]), float(mid[k])), float(deficit[k]), desc)


def _require(M: OrliczFunction) -> TwoConcavityReport:
    report = is_two_concave(M)
    if not report:
        raise NotTwoConcave(f"{M.label} is not 2-concave (witness {report.witness})", report)
    return report


def john_radius(M: OrliczFunction, d: int, require_two_concave: bool = True) -> float:
    """Radius ``sqrt(d) M^{-1}(1)`` of the maximal inscribed Euclidean ball.

    The formula identifies the John ellipsoid of ``B_M^d(d)`` only for
    2-concave ``M``; pass ``require_two_concave=False`` to get the radius
    regardless (it is then merely the radius of an inscribed ball).
    """
    if d < 1:
        raise ValueError("d must be at least 1")
    if require_two_concave:
        _require(M)
    return math.sqrt(d) * inverse_at(M, 1.0)


def asymptotic_volume_ratio(
    M: OrliczFunction, require_two_concave: bool = True, tilt: Optional[GibbsTilt] = None
) -> VolumeRatioResult:
    """``lim vr(B_M^d(d)) = exp(phi(alpha_*) - alpha_*) / (sqrt(2 pi e) M^{-1}(1))``."""
    report = _require(M) if require_two_concave else is_two_concave(M)
    tilt = tilt or solve_tilt(M, 1.0)
    m_inv = inverse_at(M, 1.0)
    log_vr = tilt.rate - 0.5 * math.log(2.0 * math.pi * math.e) - math.log(m_inv)
    vr = math.exp(log_vr)
    return VolumeRatioResult(vr, tilt.alpha_star, m_inv, report, vr < VR_SANITY_FLOOR)


def lp_finite_volume_ratio(p: float, d: int) -> float:
    """Exact ``(vol B_p(d) / vol John ball)^(1/d)`` for ``M = |t|^p``, ``1 <= p <= 2``.

    Uses the exact ball volume and ``M^{-1}(1) = 1``, so the John ball has
    radius ``sqrt(d)``.
    """
    log_ratio = exact_lp_log_volume(p, 1.0, d) - log_euclidean_ball_volume(math.sqrt(d), d)
    return math.exp(log_ratio / d)

"""Volumes of Orlicz balls ``B_M^d(dR) = {x : sum M(x_i) <= dR}``.

All volumes are logarithms. ``exp(d * rate)`` leaves the double range
around ``d ~ 500`` for ordinary rates, so nothing here exponentiates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import gammaln

from .function import OrliczFunction, inverse_at
from .tilt import GibbsTilt, solve_tilt


@dataclass(frozen=True)
class LogVolume:
    """``total_log = d * rate + prefactor_log``."""

    d: int
    rate: float
    prefactor_log: float
    total_log: float

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be at least 1")

    def to_dict(self) -> dict:
        return {"d": self.d, "rate": self.rate, "prefactor_log": self.prefactor_log, "total_log": self.total_log}


def _positive(name: str, value: float) -> None:
    if not (value > 0) or not math.isfinite(value):
        raise ValueError(f"{name} must be positive and finite, got {value}")


def log_volume_rate(M: OrliczFunction, R: float, tilt: Optional[GibbsTilt] = None) -> float:
    """Limit of ``(1/d) log vol B_M^d(dR)``: ``phi(alpha_*) - alpha_* R``."""
    _positive("R", R)
    return (tilt or solve_tilt(M, R)).rate


def precise_log_volume(M: OrliczFunction, R: float, d: int, tilt: Optional[GibbsTilt] = None) -> LogVolume:
    """Asymptotic ``log vol B_M^d(dR)`` including the subexponential prefactor.

    The prefactor is ``1 / (|alpha_*| sqrt(2 pi d sigma_*^2))``. This is a
    ``(1 + o(1))`` statement as ``d -> inf``; no finite-``d`` error bound is
    claimed (compare :func:`exact_lp_log_volume` for power functions).
    """
    _positive("R", R)
    if d < 1:
        raise ValueError("d must be at least 1")
    tilt = tilt or solve_tilt(M, R)
    prefactor = -(math.log(abs(tilt.alpha_star)) + 0.5 * math.log(2.0 * math.pi * d * tilt.sigma_sq))
    return LogVolume(int(d), tilt.rate, prefactor, d * tilt.rate + prefactor)


def exact_lp_log_volume(p: float, R: float, d: int) -> float:
    """Exact ``log vol {x : sum |x_i|^p <= dR}`` (Dirichlet's formula)."""
    _positive("p", p)
    _positive("R", R)
    return (
        (d / p) * math.log(d * R)
        + d * (math.log(2.0) + float(gammaln(1.0 + 1.0 / p)))
        - float(gammaln(1.0 + d / p))
    )


def log_euclidean_ball_volume(radius: float, d: int) -> float:
    return d * math.log(radius) + 0.5 * d * math.log(math.pi) - float(gammaln(1.0 + 0.5 * d))


def schuett_log_estimate(M: OrliczFunction, d: int) -> float:
    """Order-of-magnitude ``log vol`` of the unit ball ``{sum M(x_i) <= 1}``.

    ``d log 2 + d log M^{-1}(1/d)``, correct only up to an unknown absolute
    constant factor per dimension.
    """
    if d < 1:
        raise ValueError("d must be at least 1")
    return d * math.log(2.0) + d * math.log(inverse_at(M, 1.0 / d))


def _sum_m(M: OrliczFunction, x: np.ndarray) -> float:
    return math.fsum(np.asarray(M(x), dtype=float).ravel())


def luxemburg_norm(M: OrliczFunction, x: Sequence[float], rel_tol: float = 1e-12, max_iter: int = 200) -> float:
    """``inf{rho > 0 : sum M(x_i / rho) <= 1}`` by bracketed bisection."""
    x = np.abs(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(x)):
        raise ValueError("vector must be finite")
    if not np.any(x > 0):
        return 0.0

    def excess(rho):
        return _sum_m(M, x / rho) - 1.0

    hi = float(x.max())
    while excess(hi) > 0:
        hi *= 2.0
    lo = hi
    while excess(lo) <= 0:
        lo *= 0.5
    # invariant: excess(lo) > 0 >= excess(hi)
    for _ in range(max_iter):
        if hi - lo <= rel_tol * max(1.0, hi):
            break
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
    return hi


def ball_contains(M: OrliczFunction, level: float, x: Sequence[float]) -> bool:
    """Whether ``sum M(x_i) <= level``."""
    _positive("level", level)
    return _sum_m(M, np.asarray(x, dtype=float)) <= level

"""The tilt function ``phi(alpha) = log int exp(alpha M(x)) dx`` and its Gibbs density.

For ``alpha < 0`` the derivative ``phi'`` increases from 0 (as
``alpha -> -inf``) to ``+inf`` (as ``alpha -> 0``), so every level ``R > 0``
has a unique tilt ``alpha_*`` with ``phi'(alpha_*) = R``. The density
``exp(alpha_* M(x) - phi(alpha_*))`` then has ``E[M(Z)] = R`` and
``Var[M(Z)] = phi''(alpha_*)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, NoBracket
from .function import OrliczFunction, inverse_at
from .numerics import (
    DEFAULT_QUAD_TOL,
    DEFAULT_ROOT_TOL,
    Bracket,
    ExpWitness,
    ShellWitness,
    find_root_monotone,
    integrate_decaying_many,
)

MAX_BRACKET_EXPONENT = 60


def tilt_scale(M: OrliczFunction, alpha: float) -> float:
    """Width ``x0`` of the tilted density: the point where ``|alpha| M(x0) = 1``."""
    return inverse_at(M, 1.0 / abs(alpha))


def moment_witness(alpha: float, x0: float, k: float = 0.0, C: float = 1.0) -> ExpWitness:
    """Exponential majorant of ``C (1 + M)^k exp(alpha M)`` beyond ``x0``.

    Convexity and ``M(0) = 0`` give ``M(x) >= |x| / (|alpha| x0)`` for
    ``|x| >= x0``. For ``k = 0`` that bounds ``exp(alpha M)`` directly; for
    ``k > 0`` half of the exponent absorbs the polynomial factor, whose
    supremum against ``exp(alpha u / 2)`` is computed in closed form.
    """
    a = abs(alpha)
    if k == 0:
        return ExpWitness(C * math.exp(-1.0), 1.0 / x0, x0)
    u_star = 2.0 * k / a - 1.0
    if u_star <= 0:
        peak = 1.0
    else:
        peak = math.exp(k * math.log(2.0 * k / a) - k + 0.5 * a)
    return ExpWitness(C * peak * math.exp(-0.5), 0.5 / x0, x0)


def _check_alpha(alpha: float) -> None:
    if not (alpha < 0) or not math.isfinite(alpha):
        raise DomainError(f"tilt parameter must be negative and finite, got {alpha}")


def _moments(M: OrliczFunction, alpha: float, rel_tol: float):
    """Integrals of ``M^k exp(alpha M)`` for k = 0, 1, 2, plus the scale used."""
    _check_alpha(alpha)
    x0 = tilt_scale(M, alpha)

    def integrand(x):
        m = M(x)
        e = np.exp(alpha * m)
        me = np.where(e > 0, m * e, 0.0)
        return np.stack([e, me, np.where(e > 0, m * me, 0.0)])

    witnesses = [moment_witness(alpha, x0, k) for k in (0, 1, 2)]
    res = integrate_decaying_many(integrand, witnesses, rel_tol, scale=x0)
    return [r.value for r in res], x0


def phi(M: OrliczFunction, alpha: float, rel_tol: float = DEFAULT_QUAD_TOL) -> float:
    """``log int exp(alpha M(x)) dx`` for ``alpha < 0``."""
    _check_alpha(alpha)
    x0 = tilt_scale(M, alpha)
    (res,) = integrate_decaying_many(
        lambda x: np.exp(alpha * M(x))[None, :], [moment_witness(alpha, x0)], rel_tol, scale=x0
    )
    return math.log(res.value)


def phi_derivatives(M: OrliczFunction, alpha: float, rel_tol: float = DEFAULT_QUAD_TOL) -> tuple[float, float]:
    """``(phi'(alpha), phi''(alpha))`` as a Gibbs mean and variance of ``M``."""
    (i0, i1, i2), _ = _moments(M, alpha, rel_tol)
    phi1 = i1 / i0
    phi2 = i2 / i0 - phi1 * phi1
    return phi1, phi2


@dataclass(frozen=True)
class GibbsTilt:
    """Solved tilt for the pair ``(M, R)``.

    ``rate = phi_at - alpha_star * R`` is the per-dimension log-volume of
    ``B_M^d(dR)``; ``scale`` is the width used to lay out quadrature panels
    and the sampler table.
    """

    M: OrliczFunction
    R: float
    alpha_star: float
    phi_at: float
    sigma_sq: float
    rate: float
    scale: float

    def to_dict(self) -> dict:
        return {
            "M": self.M.label,
            "R": self.R,
            "alpha_star": self.alpha_star,
            "phi_at": self.phi_at,
            "sigma_sq": self.sigma_sq,
            "rate": self.rate,
        }


def solve_tilt(
    M: OrliczFunction,
    R: float,
    quad_tol: float = DEFAULT_QUAD_TOL,
    root_tol: float = DEFAULT_ROOT_TOL,
) -> GibbsTilt:
    """Find ``alpha_* < 0`` with ``phi'(alpha_*) = R``.

    Works in ``u = -log2(-alpha)`` where ``log phi'`` is increasing (and
    exactly linear for power functions). The bracket is scanned over
    ``alpha = -2^k`` and ``alpha = -2^-k`` for ``k <= 60``.

    Raises:
        NoBracket: ``phi'`` never crosses ``R`` within the scan.
    """
    if not (R > 0) or not math.isfinite(R):
        raise DomainError(f"R must be positive and finite, got {R}")
    cache: dict[float, tuple] = {}

    def log_phi1(u: float) -> float:
        if u not in cache:
            cache[u] = _moments(M, -(2.0 ** -u), quad_tol)
        (i0, i1, _), _ = cache[u]
        return math.log(i1 / i0)

    target = math.log(R)
    f0 = log_phi1(0.0) - target
    if f0 == 0:
        u_star = 0.0
    else:
        step = 1.0 if f0 < 0 else -1.0
        prev_u, prev_f = 0.0, f0
        for k in range(1, MAX_BRACKET_EXPONENT + 1):
            u = step * k
            fu = log_phi1(u) - target
            if fu == 0 or (fu > 0) != (prev_f > 0):
                break
            prev_u, prev_f = u, fu
        else:
            raise NoBracket(f"no tilt with phi' = {R} for alpha in [-2^60, -2^-60] ({M.label})")
        if fu == 0:
            u_star = u
        else:
            lo, hi = sorted((prev_u, u))
            f_lo, f_hi = (prev_f, fu) if prev_u < u else (fu, prev_f)
            u_star = find_root_monotone(log_phi1, target, Bracket(lo, hi, f_lo, f_hi), root_tol)
    alpha = -(2.0 ** -u_star)
    (i0, i1, i2), x0 = cache[u_star] if u_star in cache else _moments(M, alpha, quad_tol)
    phi_at = math.log(i0)
    phi1 = i1 / i0
    sigma_sq = i2 / i0 - phi1 * phi1
    return GibbsTilt(M, float(R), alpha, phi_at, sigma_sq, phi_at - alpha * R, x0)


def gibbs_logpdf(tilt: GibbsTilt, x):
    """``alpha_* M(x) - phi(alpha_*)``; vectorized."""
    out = tilt.alpha_star * tilt.M(x) - tilt.phi_at
    return float(out) if np.ndim(out) == 0 else out


def gibbs_pdf(tilt: GibbsTilt, x):
    return np.exp(gibbs_logpdf(tilt, x))


def gibbs_moment(
    tilt: GibbsTilt,
    g: Callable[[np.ndarray], np.ndarray],
    growth: Optional[tuple[float, float]] = None,
    rel_tol: float = DEFAULT_QUAD_TOL,
) -> float:
    """``int g(x) p(x) dx`` under the Gibbs density of ``tilt``.

    Args:
        g: vectorized function.
        growth: ``(C, k)`` declaring ``|g(x)| <= C (1 + M(x))^k``; turns into
            a rigorous exponential tail bound. Without it the tail is
            estimated numerically from the integrand itself.

    Raises:
        TailUnbounded: the integrand does not decay.
    """
    alpha, x0 = tilt.alpha_star, tilt.scale

    def integrand(x):
        e = np.exp(alpha * tilt.M(x) - tilt.phi_at)
        gx = np.asarray(g(x), dtype=float) * np.ones_like(x)
        return np.where(e > 0, gx * e, 0.0)[None, :]

    if growth is not None:
        C, k = growth
        witness = moment_witness(alpha, x0, k, C * math.exp(-tilt.phi_at))
    else:
        witness = ShellWitness(lambda x: integrand(x)[0], start=x0)
    (res,) = integrate_decaying_many(integrand, [witness], rel_tol, scale=x0)
    return res.value

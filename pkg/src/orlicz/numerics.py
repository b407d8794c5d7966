"""Quadrature over the real line, bracketed root finding, log-space helpers.

The integrals of interest look like ``g(x) exp(alpha M(x))`` with
``alpha < 0``: smooth away from a few points, decaying at least
exponentially. :func:`integrate_decaying` truncates them at a point chosen
from a caller-supplied decay witness and integrates the finite part with
adaptive Gauss-Kronrod (7/15) panels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NoBracket, NoConvergence, TailUnbounded

DEFAULT_QUAD_TOL = 1e-10
DEFAULT_ROOT_TOL = 1e-12
MAX_EVALUATIONS = 10**6

# Kronrod 15-point abscissae on [0, 1] (the rule is symmetric) and weights;
# the odd-indexed abscissae are the 7-point Gauss nodes.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])          # 15 nodes on [-1, 1]
_K_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
_G_WEIGHTS = np.zeros(15)
_G_WEIGHTS[[1, 3, 5]] = _WG[:3]
_G_WEIGHTS[[9, 11, 13]] = _WG[2::-1]
_G_WEIGHTS[7] = _WG[3]


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error_estimate: float
    truncation_point: float
    evaluations: int


@dataclass(frozen=True)
class Bracket:
    lo: float
    hi: float
    f_lo: float
    f_hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"bracket needs lo < hi, got [{self.lo}, {self.hi}]")
        if np.sign(self.f_lo) == np.sign(self.f_hi) and self.f_lo != 0 and self.f_hi != 0:
            raise ValueError("bracket endpoints must have residuals of opposite sign")


# --------------------------------------------------------------------------
# Decay witnesses


@dataclass(frozen=True)
class ExpWitness:
    """Bound ``|f(x)| <= amplitude * exp(-rate * (|x| - start))`` for ``|x| >= start``."""

    amplitude: float
    rate: float
    start: float = 1.0

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise TailUnbounded(f"witness rate must be positive and finite, got {self.rate}")
        if not (self.amplitude >= 0 and math.isfinite(self.amplitude)):
            raise TailUnbounded(f"witness amplitude must be finite, got {self.amplitude}")

    def __call__(self, x):
        return self.amplitude * np.exp(-self.rate * (np.abs(x) - self.start))

    def tail(self, T: float) -> float:
        """Witness mass of ``{|x| > T}`` (both sides), for ``T >= start``."""
        T = max(T, self.start)
        return 2.0 * self.amplitude / self.rate * math.exp(-self.rate * (T - self.start))

    def cutoff(self, budget: float) -> float:
        """Smallest ``T >= start`` with ``tail(T) <= budget``."""
        if self.amplitude == 0.0:
            return self.start
        need = 2.0 * self.amplitude / (self.rate * budget)
        return self.start + max(0.0, math.log(need)) / self.rate


@dataclass(frozen=True)
class ShellWitness:
    """Numerical tail estimate for a decreasing-in-``|x|`` majorant.

    The tail beyond ``T`` is summed over doubling shells
    ``[T 2^k, T 2^(k+1)]`` until a shell adds less than ``1e-3`` of the
    running total. This is an estimate rather than a bound, so it suits
    integrands that are eventually monotone (which convex ``M`` guarantees).
    """

    fn: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    start: float = 1.0
    max_shells: int = 60

    def __call__(self, x):
        return self.fn(np.abs(np.asarray(x, dtype=float)))

    def tail(self, T: float) -> float:
        T = max(T, self.start)
        total = 0.0
        prev = math.inf
        a = T
        for _ in range(self.max_shells):
            b = 2.0 * a
            xs = 0.5 * (a + b) + 0.5 * (b - a) * _NODES
            fx = np.abs(self.fn(xs)) + np.abs(self.fn(-xs))
            shell = float(0.5 * (b - a) * np.dot(_K_WEIGHTS, fx))
            if not math.isfinite(shell):
                raise TailUnbounded(f"integrand is not finite on [{a:g}, {b:g}]")
            total += shell
            if shell <= 1e-3 * total or shell == 0.0:
                return total
            if shell > prev and a > 64 * T:
                break
            prev = shell
            a = b
        raise TailUnbounded(f"integrand tail beyond {T:g} does not decay")

    def cutoff(self, budget: float) -> float:
        T = self.start
        for _ in range(self.max_shells):
            if self.tail(T) <= budget:
                return T
            T *= 2.0
        raise TailUnbounded("no truncation point meets the tail budget")


Witness = ExpWitness | ShellWitness


# --------------------------------------------------------------------------
# Adaptive Gauss-Kronrod


def _gk_panels(func, a: np.ndarray, b: np.ndarray):
    """Apply G7/K15 on each panel; ``func`` maps (n,) -> (k, n)."""
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    xs = (c[:, None] + h[:, None] * _NODES[None, :]).ravel()
    fx = np.asarray(func(xs), dtype=float)
    fx = fx.reshape(fx.shape[0], a.size, 15)
    kron = np.einsum("kpn,n->kp", fx, _K_WEIGHTS) * h
    gauss = np.einsum("kpn,n->kp", fx, _G_WEIGHTS) * h
    absk = np.einsum("kpn,n->kp", np.abs(fx), _K_WEIGHTS) * h
    return kron, np.abs(kron - gauss), absk


def adaptive_gk(
    func,
    breaks: Sequence[float],
    rel_tol: float,
    abs_floor: Optional[np.ndarray] = None,
    max_evals: int = MAX_EVALUATIONS,
):
    """Integrate a vector-valued ``func`` over ``[breaks[0], breaks[-1]]``.

    Panels whose error estimate exceeds their share of the tolerance are
    bisected until ``sum(err) <= rel_tol * max(int |f|, abs_floor)`` holds
    for every component. Returns ``(values, errors, int_abs, evaluations)``.
    """
    edges = np.unique(np.asarray(breaks, dtype=float))
    a, b = edges[:-1], edges[1:]
    done_val, done_err, done_abs = [], [], []
    evals = 0
    while True:
        kron, err, absk = _gk_panels(func, a, b)
        evals += 15 * a.size
        done_val.append(kron)
        done_err.append(err)
        done_abs.append(absk)
        total_abs = np.array([math.fsum(r) for r in np.concatenate(done_abs, axis=1)])
        total_err = np.array([math.fsum(r) for r in np.concatenate(done_err, axis=1)])
        scale = total_abs if abs_floor is None else np.maximum(total_abs, abs_floor)
        budget = rel_tol * scale
        if np.all(total_err <= budget):
            break
        if evals > max_evals:
            raise NoConvergence(
                f"quadrature error {total_err.max():.3g} above budget after {evals} evaluations"
            )
        # share of the budget a panel may use, proportional to its width
        width = float(edges[-1] - edges[0])
        share = budget[:, None] * ((b - a) / width)[None, :]
        split = np.any(err > share, axis=0)
        if not split.any():
            split = np.any(err >= err.max(axis=1, keepdims=True) * 0.5, axis=0)
        # retire converged panels, bisect the rest
        keep = ~split
        done_val[-1] = kron[:, keep]
        done_err[-1] = err[:, keep]
        done_abs[-1] = absk[:, keep]
        mid = 0.5 * (a[split] + b[split])
        a, b = np.concatenate([a[split], mid]), np.concatenate([mid, b[split]])
    vals = np.concatenate(done_val, axis=1)
    errs = np.concatenate(done_err, axis=1)
    abss = np.concatenate(done_abs, axis=1)
    values = np.array([math.fsum(r) for r in vals])
    errors = np.array([math.fsum(r) for r in errs])
    int_abs = np.array([math.fsum(r) for r in abss])
    return values, errors, int_abs, evals


def _symmetric_breaks(T: float, scale: float, extra: Sequence[float] = ()) -> list[float]:
    pts = {0.0, T, -T}
    s = scale / 8.0
    while s < T:
        pts.add(s)
        pts.add(-s)
        s *= 2.0
    for e in extra:
        if -T < e < T:
            pts.add(float(e))
    return sorted(pts)


def integrate_decaying_many(
    func: Callable[[np.ndarray], np.ndarray],
    witnesses: Sequence[Witness],
    rel_tol: float = DEFAULT_QUAD_TOL,
    *,
    scale: float = 1.0,
    breakpoints: Sequence[float] = (),
    max_evals: int = MAX_EVALUATIONS,
) -> list[QuadratureResult]:
    """Integrate several integrands sharing nodes; ``func`` returns shape (k, n)."""
    if not (scale > 0 and math.isfinite(scale)):
        raise ValueError(f"scale must be positive, got {scale}")
    k = len(witnesses)
    # running estimate on a core interval fixes the tail budget
    core = max(max(w.start for w in witnesses), scale)
    ref = np.zeros(k)
    evals = 0
    for _ in range(64):
        _, _, ref, n = adaptive_gk(func, _symmetric_breaks(core, scale, breakpoints), 1e-3, max_evals=max_evals)
        evals += n
        if np.all(ref > 0):
            break
        core *= 2.0
    T = core
    for w, r in zip(witnesses, ref):
        if r > 0:
            T = max(T, w.cutoff(1e-3 * rel_tol * r))
    values, errors, int_abs, n = adaptive_gk(
        func, _symmetric_breaks(T, scale, breakpoints), 0.9 * rel_tol, max_evals=max_evals
    )
    evals += n
    tails = [w.tail(T) for w in witnesses]
    return [
        QuadratureResult(float(v), float(e + t), float(T), evals)
        for v, e, t in zip(values, errors, tails)
    ]


def integrate_decaying(
    f: Callable[[np.ndarray], np.ndarray],
    decay_witness: Witness | Callable[[np.ndarray], np.ndarray],
    rel_tol: float = DEFAULT_QUAD_TOL,
    *,
    scale: float = 1.0,
    breakpoints: Sequence[float] = (),
    max_evals: int = MAX_EVALUATIONS,
) -> QuadratureResult:
    """Integrate ``f`` over the real line.

    Args:
        f: vectorized integrand.
        decay_witness: majorant of ``|f|`` for large ``|x|``; an
            :class:`ExpWitness` gives a rigorous closed-form tail, a bare
            callable is wrapped in a :class:`ShellWitness` (numerical tail).
        rel_tol: target for ``error / int |f|``; the witness tail beyond
            the truncation point is held to ``rel_tol / 1000`` of ``int |f|``.
        scale: typical width of the integrand; seeds the panel layout.

    Raises:
        TailUnbounded: the witness does not decay.
        NoConvergence: the evaluation budget ran out.
    """
    if not isinstance(decay_witness, (ExpWitness, ShellWitness)):
        decay_witness = ShellWitness(decay_witness)
    (res,) = integrate_decaying_many(
        lambda x: np.asarray(f(x), dtype=float)[None, :],
        [decay_witness],
        rel_tol,
        scale=scale,
        breakpoints=breakpoints,
        max_evals=max_evals,
    )
    return res


def integrate_interval(f, a: float, b: float, rel_tol: float = DEFAULT_QUAD_TOL) -> float:
    """Adaptive Gauss-Kronrod on a finite interval."""
    if a == b:
        return 0.0
    sign = 1.0
    if a > b:
        a, b, sign = b, a, -1.0
    values, _, _, _ = adaptive_gk(lambda x: np.asarray(f(x), dtype=float)[None, :], [a, b], rel_tol)
    return sign * float(values[0])


# --------------------------------------------------------------------------
# Root finding


@dataclass(frozen=True)
class RootResult:
    root: float
    residual: float
    bracket: Bracket
    iterations: int
    residual_history: tuple[float, ...]


def _expand(g, target, x0, step, lo_dom, hi_dom, max_expand):
    f0 = g(x0) - target
    if f0 == 0:
        return None, x0
    direction = 1.0 if f0 < 0 else -1.0
    bound = hi_dom if direction > 0 else lo_dom
    x_prev, f_prev = x0, f0
    h = abs(step)
    for _ in range(max_expand):
        x = x_prev + direction * h
        if math.isinf(bound) is False and (x - bound) * direction >= 0:
            x = 0.5 * (x_prev + bound)
        fx = g(x) - target
        if fx == 0:
            return None, x
        if (fx > 0) != (f_prev > 0):
            lo, hi = (x_prev, x) if direction > 0 else (x, x_prev)
            f_lo, f_hi = (f_prev, fx) if direction > 0 else (fx, f_prev)
            return Bracket(lo, hi, f_lo, f_hi), None
        x_prev, f_prev = x, fx
        h *= 2.0
    raise NoBracket(f"target {target} not reached after {max_expand} expansion steps")


def find_root_monotone(
    g: Callable[[float], float],
    target: float,
    seed_bracket: Optional[Bracket] = None,
    rel_tol: float = DEFAULT_ROOT_TOL,
    *,
    x0: float = 0.0,
    step: float = 1.0,
    domain: tuple[float, float] = (-math.inf, math.inf),
    max_expand: int = 200,
    max_iter: int = 2000,
    full_output: bool = False,
):
    """Solve ``g(x) = target`` for strictly increasing ``g``.

    Without ``seed_bracket`` a bracket is found by stepping from ``x0`` with
    doubling steps (halving toward a finite domain endpoint). Inside the
    bracket, Illinois-modified false position is used while it shrinks the
    bracket fast enough; otherwise the step falls back to bisection.

    Returns the root, or a :class:`RootResult` when ``full_output`` is set.
    """
    tol = rel_tol * max(1.0, abs(target))

    def resid(x):
        return float(g(x)) - target

    if seed_bracket is None:
        br, exact = _expand(lambda x: float(g(x)), target, x0, step, domain[0], domain[1], max_expand)
        if exact is not None:
            r = RootResult(exact, 0.0, Bracket(exact - 1.0, exact + 1.0, -1.0, 1.0), 0, (0.0,))
            return r if full_output else exact
    else:
        br = seed_bracket
        if br.f_lo > 0 or br.f_hi < 0:
            raise NoBracket("seed bracket does not straddle the target")
    lo, hi, f_lo, f_hi = br.lo, br.hi, br.f_lo, br.f_hi

    best_x, best_r = (lo, abs(f_lo)) if abs(f_lo) <= abs(f_hi) else (hi, abs(f_hi))
    history = [best_r]
    widths = [hi - lo]
    side = 0
    it = 0
    while best_r > tol and it < max_iter:
        it += 1
        # bisect unless false position halved the bracket over the last two steps
        slow = len(widths) >= 3 and (hi - lo) > 0.5 * widths[-3]
        x = lo - f_lo * (hi - lo) / (f_hi - f_lo) if f_hi != f_lo else 0.5 * (lo + hi)
        if slow or not (lo < x < hi):
            x = 0.5 * (lo + hi)
        if x <= lo or x >= hi:
            break
        fx = resid(x)
        if abs(fx) < best_r:
            best_x, best_r = x, abs(fx)
        history.append(best_r)
        if fx == 0:
            break
        if fx < 0:
            lo, f_lo = x, fx
            if side == -1:
                f_hi *= 0.5
            side = -1
        else:
            hi, f_hi = x, fx
            if side == 1:
                f_lo *= 0.5
            side = 1
        widths.append(hi - lo)
    if not full_output:
        return best_x
    final = Bracket(lo, hi, -abs(f_lo) or -1e-300, abs(f_hi) or 1e-300) if lo < hi else br
    return RootResult(best_x, best_r, final, it, tuple(history))


# --------------------------------------------------------------------------
# Log-space helpers


def log_sum_exp(values: Sequence[float]) -> float:
    """``log(sum(exp(v)))`` with a max shift; ``-inf`` entries are ignored."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("log_sum_exp needs at least one value")
    m = float(np.max(v))
    if m == -math.inf:
        return -math.inf
    if m == math.inf:
        return math.inf
    return m + math.log(math.fsum(np.exp(v - m)))


def log_mean_exp(values: Sequence[float]) -> float:
    v = np.asarray(values, dtype=float)
    return log_sum_exp(v) - math.log(v.size)

"""Orlicz functions: parsing, evaluation, sampled validation and inversion.

Expressions are written in a small grammar over the variable ``t``::

    expr   := term (('+'|'-') term)*
    term   := factor ('*' factor)*
    factor := base ('^' number)?
    base   := number | 't' | 'abs(' expr ')' | 'exp(' expr ')'
            | 'cosh(' expr ')' | '(' expr ')'

Parsing produces an immutable tree of dataclass nodes which is interpreted
with numpy, so a single :class:`OrliczFunction` evaluates scalars and
arrays alike.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import EvaluationOverflow, ExpressionSyntaxError, NoBracket, NotOrlicz

# --------------------------------------------------------------------------
# Expression tree


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class BinOp:
    op: str  # one of '+', '-', '*'
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: float


@dataclass(frozen=True)
class Call:
    name: str  # 'abs', 'exp' or 'cosh'
    arg: "Node"


@dataclass(frozen=True)
class Opaque:
    """Leaf wrapping a vectorized callable; only built programmatically."""

    fn: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    label: str = "opaque"


Node = Union[Num, Var, BinOp, Pow, Call, Opaque]

_FUNCS = {"abs": np.abs, "exp": np.exp, "cosh": np.cosh}


def _interpret(node: Node, x: np.ndarray) -> np.ndarray:
    if isinstance(node, Var):
        return x
    if isinstance(node, Num):
        return np.full_like(x, node.value)
    if isinstance(node, BinOp):
        a = _interpret(node.left, x)
        b = _interpret(node.right, x)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        return a * b
    if isinstance(node, Pow):
        base = _interpret(node.base, x)
        if node.exponent == 1.0:
            return base
        if node.exponent == 2.0:
            return base * base
        return np.power(base, node.exponent)
    if isinstance(node, Call):
        return _FUNCS[node.name](_interpret(node.arg, x))
    if isinstance(node, Opaque):
        return np.asarray(node.fn(x), dtype=float)
    raise TypeError(f"unknown node {node!r}")


def _substitute(node: Node, repl: Node) -> Node:
    if isinstance(node, Var):
        return repl
    if isinstance(node, BinOp):
        return BinOp(node.op, _substitute(node.left, repl), _substitute(node.right, repl))
    if isinstance(node, Pow):
        return Pow(_substitute(node.base, repl), node.exponent)
    if isinstance(node, Call):
        return Call(node.name, _substitute(node.arg, repl))
    if isinstance(node, Opaque):
        fn = node.fn
        return Opaque(lambda x: fn(_interpret(repl, x)), f"{node.label}∘subst")
    return node


def unparse(node: Node) -> str:
    """Render a tree back to grammar text (fully parenthesized binary ops)."""
    if isinstance(node, Var):
        return "t"
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, BinOp):
        return f"({unparse(node.left)} {node.op} {unparse(node.right)})"
    if isinstance(node, Pow):
        return f"{unparse(node.base)}^{node.exponent!r}"
    if isinstance(node, Call):
        return f"{node.name}({unparse(node.arg)})"
    return f"<{node.label}>"


# --------------------------------------------------------------------------
# Parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*^()]))"
)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            if text[pos:].strip() == "":
                break
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                raise ExpressionSyntaxError(f"unexpected character {text[pos]!r}", pos, text)
            kind = m.lastgroup
            start = m.start(kind)
            self.tokens.append((kind, m.group(kind), start))
            pos = m.end()
        self.tokens.append(("end", "", len(text)))
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.take()
        if val != value:
            found = "end of input" if kind == "end" else repr(val)
            raise ExpressionSyntaxError(f"expected {value!r}, found {found}", pos, self.text)

    def parse(self) -> Node:
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExpressionSyntaxError(f"unexpected token {val!r}", pos, self.text)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.peek()[:2] == ("op", "*"):
            self.take()
            node = BinOp("*", node, self.factor())
        return node

    def factor(self) -> Node:
        node = self.base()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            kind, val, pos = self.take()
            if kind != "num":
                raise ExpressionSyntaxError(
                    "exponent must be a literal nonnegative number", pos, self.text
                )
            node = Pow(node, float(val))
        return node

    def base(self) -> Node:
        kind, val, pos = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            if val == "t":
                return Var()
            if val in _FUNCS:
                self.expect("(")
                inner = self.expr()
                self.expect(")")
                return Call(val, inner)
            raise ExpressionSyntaxError(f"unknown name {val!r}", pos, self.text)
        if (kind, val) == ("op", "("):
            inner = self.expr()
            self.expect(")")
            return inner
        found = "end of input" if kind == "end" else repr(val)
        raise ExpressionSyntaxError(f"expected a number, 't', or a function, found {found}", pos, self.text)


def parse_expression(text: str) -> Node:
    """Parse grammar text into a tree without validating Orlicz properties."""
    return _Parser(text).parse()


# --------------------------------------------------------------------------
# Builtin family detection


@dataclass(frozen=True)
class BuiltinTag:
    """Known family of an expression. ``params`` depends on the family:

    * ``power``: ``(p,)`` for ``|t|^p``
    * ``mixed``: ``((c1, p1), (c2, p2), ...)`` for ``sum c_i |t|^p_i``
    * ``coshm1`` and ``expabs``: ``()``
    """

    family: str
    params: tuple = ()


def _is_abs_t(node: Node) -> bool:
    return isinstance(node, Call) and node.name == "abs" and isinstance(node.arg, Var)


def _power_term(node: Node) -> Optional[tuple[float, float]]:
    """Match ``c * |t|^p`` (either factor order) and return (c, p)."""
    if _is_abs_t(node):
        return 1.0, 1.0
    if isinstance(node, Pow):
        if _is_abs_t(node.base):
            return 1.0, node.exponent
        if isinstance(node.base, Var) and node.exponent > 0 and node.exponent % 2 == 0:
            return 1.0, node.exponent
        return None
    if isinstance(node, BinOp) and node.op == "*":
        for c, rest in ((node.left, node.right), (node.right, node.left)):
            if isinstance(c, Num):
                inner = _power_term(rest)
                if inner is not None:
                    return c.value * inner[0], inner[1]
    return None


def _signed_terms(node: Node, sign: float = 1.0) -> list[tuple[float, Node]]:
    if isinstance(node, BinOp) and node.op in "+-":
        right_sign = sign if node.op == "+" else -sign
        return _signed_terms(node.left, sign) + _signed_terms(node.right, right_sign)
    return [(sign, node)]


def detect_builtin(node: Node) -> Optional[BuiltinTag]:
    """Identify a builtin family by the shape of the tree (never numerically)."""
    terms = _signed_terms(node)
    powers = [(_power_term(n), s) for s, n in terms]
    if all(pt is not None and s > 0 for pt, s in powers):
        pairs = tuple((pt[0], pt[1]) for pt, _ in powers)
        if len(pairs) == 1 and pairs[0][0] == 1.0:
            return BuiltinTag("power", (pairs[0][1],))
        if all(c > 0 and p > 0 for c, p in pairs):
            return BuiltinTag("mixed", pairs)
        return None

    def is_one(n):
        return isinstance(n, Num) and n.value == 1.0

    if len(terms) == 2:
        (s1, a), (s2, b) = terms
        if (
            s1 > 0 and s2 < 0 and is_one(b)
            and isinstance(a, Call) and a.name == "cosh"
            and (isinstance(a.arg, Var) or _is_abs_t(a.arg))
        ):
            return BuiltinTag("coshm1")
    if len(terms) == 3:
        (s1, a), (s2, b), (s3, c) = terms
        if (
            s1 > 0 and s2 < 0 and s3 < 0
            and isinstance(a, Call) and a.name == "exp" and _is_abs_t(a.arg)
            and {is_one(b), is_one(c)} == {True, False}
            and (_is_abs_t(b) or _is_abs_t(c))
        ):
            return BuiltinTag("expabs")
    return None


# --------------------------------------------------------------------------
# Orlicz function


@dataclass(frozen=True)
class OrliczFunction:
    """An even convex function with ``M(0) = 0``, as an expression tree.

    Evaluation always happens at ``|t|`` so the symmetry ``M(t) = M(-t)``
    holds exactly. :meth:`raw` evaluates the tree as written and is what
    :func:`validate` inspects.
    """

    ast: Node
    label: str
    builtin_tag: Optional[BuiltinTag] = None

    @classmethod
    def from_expression(cls, text: str) -> "OrliczFunction":
        """Build from grammar text without running validation."""
        ast = parse_expression(text)
        return cls(ast, text.strip(), detect_builtin(ast))

    @classmethod
    def from_callable(cls, fn: Callable[[np.ndarray], np.ndarray], label: str) -> "OrliczFunction":
        return cls(Opaque(fn, label), label, None)

    @classmethod
    def power(cls, p: float) -> "OrliczFunction":
        return cls.from_expression(f"abs(t)^{p!r}")

    def raw(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            return _interpret(self.ast, x)

    def __call__(self, x):
        """Vectorized ``M(|x|)``; overflow saturates to ``inf`` silently."""
        return self.raw(np.abs(np.asarray(x, dtype=float)))

    def eval(self, t: float) -> float:
        """Scalar ``M(t)``; raises :class:`EvaluationOverflow` instead of returning inf."""
        if not math.isfinite(t):
            raise ValueError(f"t must be finite, got {t}")
        value = float(self(t))
        if math.isinf(value):
            raise EvaluationOverflow(f"M({t!r}) = {self.label} exceeds the floating-point range")
        return value

    def scaled(self, s: float) -> "OrliczFunction":
        """``t -> M(t/s)``."""
        if s <= 0:
            raise ValueError("scale must be positive")
        ast = _substitute(self.ast, BinOp("*", Num(1.0 / s), Var()))
        return OrliczFunction(ast, f"({self.label})(t/{s!r})", None)

    def inverse_at(self, y: float, rel_tol: float = 1e-12) -> float:
        return inverse_at(self, y, rel_tol)

    def __str__(self) -> str:
        return self.label


def evaluate(M: OrliczFunction, t: float) -> float:
    return M.eval(t)


def inverse_at(M: OrliczFunction, y: float, rel_tol: float = 1e-12, max_expand: int = 1100) -> float:
    """Return the ``s >= 0`` with ``M(s) = y``.

    A bracket ``[lo, hi]`` with ``M(lo) < y <= M(hi)`` is found by doubling
    or halving from 1, then bisected until it cannot shrink any further;
    the endpoint with the smaller residual is returned. ``rel_tol`` only
    allows an early exit once ``|M(s) - y| <= rel_tol * max(1, y)``.
    """
    if y < 0 or not math.isfinite(y):
        raise ValueError(f"y must be finite and nonnegative, got {y}")
    if y == 0:
        return 0.0
    hi = 1.0
    if float(M(hi)) >= y:
        for _ in range(max_expand):
            if float(M(hi / 2)) < y:
                break
            hi /= 2
        lo = hi / 2
    else:
        for _ in range(max_expand):
            hi *= 2
            if float(M(hi)) >= y:
                break
        else:
            raise NoBracket(f"{M.label} stays below {y} on [0, {hi:g}]")
        lo = hi / 2
    tol = rel_tol * max(1.0, y)
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = float(M(mid))
        if fm == y:
            return mid
        if fm < y:
            lo = mid
        else:
            hi = mid
    r_lo = abs(float(M(lo)) - y)
    r_hi = abs(float(M(hi)) - y)
    best = lo if r_lo < r_hi else hi
    if min(r_lo, r_hi) > tol and not math.isinf(float(M(hi))):
        # the function jumps across y; no point reaches the tolerance
        raise NoBracket(f"{M.label} has no preimage of {y} within tolerance")
    return best


# --------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class GridSpec:
    """Sample points used by the finite-sample property checks.

    ``n_log`` log-spaced magnitudes in ``[lo, hi]`` are mirrored to both
    signs and joined with 0; ``n_pairs`` random pairs are drawn from the
    grid with a fixed seed so reports are deterministic.
    """

    n_log: int = 512
    lo: float = 1e-6
    hi: float = 1e3
    n_pairs: int = 1000
    seed: int = 0

    def positive(self) -> np.ndarray:
        return np.logspace(math.log10(self.lo), math.log10(self.hi), self.n_log)

    def points(self) -> np.ndarray:
        pos = self.positive()
        return np.concatenate([-pos[::-1], [0.0], pos])

    def describe(self) -> str:
        return (
            f"{self.n_log} log-spaced points in ±[{self.lo:g}, {self.hi:g}] plus 0; "
            f"{self.n_pairs} random midpoint pairs (seed {self.seed})"
        )


DEFAULT_GRID = GridSpec()


@dataclass(frozen=True)
class Violation:
    property: str
    witness: tuple
    residual: float
    count: int = 1

    def to_dict(self):
        return {
            "property": self.property,
            "witness": [float(w) for w in self.witness],
            "residual": float(self.residual),
            "count": self.count,
        }


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    violations: tuple[Violation, ...]
    grid_spec: str

    def __bool__(self) -> bool:
        return self.passed

    def get(self, prop: str) -> Optional[Violation]:
        for v in self.violations:
            if v.property == prop:
                return v
        return None

    def to_dict(self):
        return {
            "passed": self.passed,
            "violations": [v.to_dict() for v in self.violations],
            "grid_spec": self.grid_spec,
        }


def _first(mask: np.ndarray) -> Optional[int]:
    idx = np.flatnonzero(mask)
    return int(idx[0]) if idx.size else None


def _relative_slack(*vals: np.ndarray) -> np.ndarray:
    total = np.ones_like(vals[0])
    for v in vals:
        total = total + np.abs(v)
    return 1e-9 * total


def midpoint_pairs(points: np.ndarray, canonical: list[tuple[float, float]], n_random: int, seed: int):
    """Pairs checked by the midpoint tests: canonical first, then consecutive, then random."""
    xs = [a for a, _ in canonical] + list(points[:-1])
    ys = [b for _, b in canonical] + list(points[1:])
    rng = np.random.default_rng(seed)
    i = rng.integers(0, points.size, n_random)
    j = rng.integers(0, points.size, n_random)
    xs = np.concatenate([np.asarray(xs, dtype=float), points[i]])
    ys = np.concatenate([np.asarray(ys, dtype=float), points[j]])
    return xs, ys


def validate(M: OrliczFunction, grid: GridSpec = DEFAULT_GRID) -> ValidationReport:
    """Check the defining properties of an Orlicz function on a sample grid.

    Each violated property is reported once, with the first witness found
    (canonical points such as 0, ±1 are tried before the grid) and the
    number of failing samples.
    """
    pts = grid.points()
    if pts.size == 0 or not np.allclose(pts, -pts[::-1]):
        raise ValueError("grid must be nonempty and symmetric about 0")
    violations: list[Violation] = []

    def record(prop, mask, witnesses, residuals):
        mask = np.asarray(mask, dtype=bool)
        k = _first(mask)
        if k is not None:
            violations.append(
                Violation(prop, tuple(float(w[k]) for w in witnesses), float(residuals[k]), int(mask.sum()))
            )

    m0 = float(M.raw(0.0))
    if m0 != 0.0:
        violations.append(Violation("zero", (0.0,), m0))

    with np.errstate(invalid="ignore", over="ignore"):
        pos = np.concatenate([[1.0, 2.0, 0.5], pts[pts > 0]])
        f_pos = M.raw(pos)
        f_neg = M.raw(-pos)
        diff = np.abs(f_pos - f_neg)
        # both sides overflowing to the same infinity is not an asymmetry
        both_inf = np.isinf(f_pos) & (f_pos == f_neg)
        bad_even = ~both_inf & ~(diff <= _relative_slack(f_pos, f_neg))
        record("evenness", bad_even, (pos, -pos), np.where(np.isnan(diff), np.inf, diff))

        signed = np.concatenate([pos, -pos])
        f_signed = np.concatenate([f_pos, f_neg])
        record("positivity", ~(f_signed > 0), (signed,), f_signed)

        grid_pos = pts[pts >= 0]
        f_grid = M.raw(grid_pos)
        drop = f_grid[:-1] - f_grid[1:]
        overflow = np.isinf(f_grid[:-1]) & (f_grid[:-1] == f_grid[1:])
        bad_mono = ~overflow & ((drop > _relative_slack(f_grid[:-1], f_grid[1:])) | np.isnan(drop))
        record("monotonicity", bad_mono, (grid_pos[:-1], grid_pos[1:]), drop)

        xs, ys = midpoint_pairs(pts, [(0.0, 1.0), (-1.0, 1.0), (1.0, 2.0), (0.0, 2.0)], grid.n_pairs, grid.seed)
        mid = 0.5 * (xs + ys)
        fx, fy, fm = M.raw(xs), M.raw(ys), M.raw(mid)
        avg = 0.5 * (fx + fy)
        excess = fm - avg
        overflow = np.isinf(fm) & (fm == avg)
        bad_conv = ~overflow & ((excess > _relative_slack(fx, fy)) | np.isnan(excess))
        record("convexity", bad_conv, (xs, ys, mid), excess)

    return ValidationReport(not violations, tuple(violations), grid.describe())


def parse_orlicz(text: str, grid: GridSpec = DEFAULT_GRID) -> OrliczFunction:
    """Parse and validate an Orlicz function.

    Raises:
        ExpressionSyntaxError: the text does not follow the grammar.
        NotOrlicz: the parsed function fails sampled validation.
    """
    M = OrliczFunction.from_expression(text)
    report = validate(M, grid)
    if not report.passed:
        names = ", ".join(v.property for v in report.violations)
        raise NotOrlicz(f"{text!r} is not an Orlicz function ({names} violated)", report)
    return M

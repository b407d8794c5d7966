"""Command-line front end.

Every subcommand prints one report. JSON reports have the keys
``tool_version``, ``subcommand``, ``inputs``, ``results`` and
``provenance``. Floats carry 17 significant digits. Exit codes: 0 on
success, 2 on usage errors (argparse), 1 on computation errors, with the
error serialized on stdout.
"""

from __future__ import annotations

import argparse
import math
import sys
from typing import Any, Optional, Sequence

import numpy as np

from . import __version__
from .errors import OrliczError
from .function import parse_orlicz
from .numerics import DEFAULT_QUAD_TOL, DEFAULT_ROOT_TOL

DEFAULT_SEED = 0


# --------------------------------------------------------------------------
# Serialization


def _float_text(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def _escape(s: str) -> str:
    import json

    return json.dumps(s, ensure_ascii=False)


def to_json(obj: Any, indent: int = 2, level: int = 0) -> str:
    """JSON text with floats at 17 significant digits and ``"inf"`` for infinity."""
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _float_text(float(obj))
    if isinstance(obj, str):
        return _escape(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_escape(str(k))}: {to_json(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.number)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(to_json(v) for v in obj) + "]"
        items = [pad + to_json(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _human(obj: Any, prefix: str = "") -> list[str]:
    lines = []
    if isinstance(obj, dict):
        for k, v in obj.items():
            if isinstance(v, (dict, list)) and v and not all(isinstance(x, (int, float)) for x in v):
                lines.append(f"{prefix}{k}:")
                lines.extend(_human(v, prefix + "  "))
            else:
                lines.append(f"{prefix}{k:<22} {_human_scalar(v)}")
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            lines.append(f"{prefix}[{i}]")
            lines.extend(_human(v, prefix + "  "))
    else:
        lines.append(prefix + _human_scalar(obj))
    return lines


def _human_scalar(v: Any) -> str:
    if isinstance(v, float):
        return f"{v:.10g}"
    if isinstance(v, list):
        return ", ".join(_human_scalar(x) for x in v[:8]) + (" ..." if len(v) > 8 else "")
    return str(v)


# --------------------------------------------------------------------------
# Argument parsing


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not (v > 0) or math.isinf(v):
        raise argparse.ArgumentTypeError(f"must be positive and finite: {text!r}")
    return v


def _exponent(text: str) -> float:
    if text.strip().lower() == "inf":
        return math.inf
    return _positive_float(text)


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1: {text!r}")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit nonnegative integer")
    return v


def _oracle(text: str) -> float:
    key, _, value = text.partition("=")
    if key.strip() != "p" or not value:
        raise argparse.ArgumentTypeError(f"expected p=<exponent>, got {text!r}")
    return _positive_float(value)


def _grid(text: str) -> list[float]:
    """``a:b:n`` (``n`` evenly spaced values) or a comma-separated list."""
    try:
        if ":" in text:
            a, b, n = text.split(":")
            return [float(v) for v in np.linspace(float(a), float(b), int(n))]
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}; use a:b:n or a comma list")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "csv", "human"), default=None)
    common.add_argument("--seed", type=_seed, default=DEFAULT_SEED)
    common.add_argument("--threads", type=_positive_int, default=None, help="worker cap (default: ORLICZ_THREADS or CPU count)")
    common.add_argument("--quad-tol", type=_positive_float, default=DEFAULT_QUAD_TOL)
    common.add_argument("--root-tol", type=_positive_float, default=DEFAULT_ROOT_TOL)

    parser = argparse.ArgumentParser(prog="orlicz", description="Asymptotic volumes of Orlicz balls.")
    parser.add_argument("--version", action="version", version=f"orlicz {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add(name, help_text):
        return sub.add_parser(name, parents=[common], help=help_text, description=help_text)

    def mc_flags(p, n_default):
        p.add_argument("--d", type=_positive_int, required=True)
        p.add_argument("--n", type=_positive_int, default=n_default)
        p.add_argument("--max-draws", type=_positive_int, default=None, help="override the n*d draw budget")

    p = add("volume", "precise log-volume of B_M^d(dR)")
    p.add_argument("--M", required=True)
    p.add_argument("--R", type=_positive_float, required=True)
    p.add_argument("--d", type=_positive_int, required=True)
    p.add_argument("--oracle", type=_oracle, default=None, metavar="p=P", help="compare with the exact l_p volume")

    p = add("tilt", "Gibbs tilt for (M, R)")
    p.add_argument("--M", required=True)
    p.add_argument("--R", type=_positive_float, required=True)

    p = add("intersect", "zero/one verdict for B_M1(dR1) inside B_M2(dR2)")
    for flag in ("--M1", "--M2"):
        p.add_argument(flag, required=True)
    p.add_argument("--R1", type=_positive_float, required=True)
    p.add_argument("--R2", type=_positive_float, required=True)
    p.add_argument("--tol-band", type=float, default=None)

    p = add("phase", "verdict sweep over an R2 grid (CSV)")
    for flag in ("--M1", "--M2"):
        p.add_argument(flag, required=True)
    p.add_argument("--R1", type=_positive_float, required=True)
    p.add_argument("--R2-grid", type=_grid, required=True, help="a:b:n or comma list")
    p.add_argument("--tol-band", type=float, default=None)

    p = add("ss", "lp/lq threshold constant and its Gibbs bridge")
    p.add_argument("--p", type=_exponent, required=True, help="exponent; 'inf' allowed")
    p.add_argument("--q", type=_positive_float, required=True)

    p = add("vr", "asymptotic volume ratio for 2-concave M")
    p.add_argument("--M", required=True)

    p = add("sample", "draws from the Gibbs density")
    p.add_argument("--M", required=True)
    p.add_argument("--R", type=_positive_float, required=True)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--raw", action="store_true", help="emit the draws, not a summary")

    p = add("mc-volume", "Monte Carlo log-volume")
    p.add_argument("--M", required=True)
    p.add_argument("--R", type=_positive_float, required=True)
    mc_flags(p, 10**5)

    p = add("mc-intersect", "Monte Carlo intersection ratio")
    for flag in ("--M1", "--M2"):
        p.add_argument(flag, required=True)
    p.add_argument("--R1", type=_positive_float, required=True)
    p.add_argument("--R2", type=_positive_float, required=True)
    mc_flags(p, 10**5)

    p = add("diag-marginal", "TV distance of the first-coordinate marginal to the Gibbs density")
    p.add_argument("--M", required=True)
    p.add_argument("--R", type=_positive_float, required=True)
    p.add_argument("--bins", type=_positive_int, default=50)
    mc_flags(p, 10**5)

    p = add("diag-clt", "KS statistic of S/sqrt(d) against its normal limit")
    p.add_argument("--M", required=True)
    p.add_argument("--R", type=_positive_float, required=True)
    mc_flags(p, 10**4)

    p = add("verify", "run the acceptance checks")
    p.add_argument("--skip-mc", action="store_true", help="skip the Monte Carlo checks")
    return parser


# --------------------------------------------------------------------------
# Subcommands


def _tilt(args, M, R):
    from .tilt import solve_tilt

    return solve_tilt(M, R, args.quad_tol, args.root_tol)


def _cmd_volume(args):
    from .volume import exact_lp_log_volume, precise_log_volume

    M = parse_orlicz(args.M)
    tilt = _tilt(args, M, args.R)
    lv = precise_log_volume(M, args.R, args.d, tilt)
    res = lv.to_dict() | {"alpha_star": tilt.alpha_star, "sigma_sq": tilt.sigma_sq}
    if args.oracle is not None:
        exact = exact_lp_log_volume(args.oracle, args.R, args.d)
        res["oracle"] = {"p": args.oracle, "exact_log": exact, "gap": lv.total_log - exact}
    return {"M": args.M, "R": args.R, "d": args.d, "oracle_p": args.oracle}, res


def _cmd_tilt(args):
    M = parse_orlicz(args.M)
    return {"M": args.M, "R": args.R}, _tilt(args, M, args.R).to_dict() | {"M": args.M}


def _cmd_intersect(args):
    from .intersect import intersection_verdict

    M1, M2 = parse_orlicz(args.M1), parse_orlicz(args.M2)
    v = intersection_verdict(M1, args.R1, M2, args.R2, args.tol_band, tilt=_tilt(args, M1, args.R1))
    inputs = {"M1": args.M1, "R1": args.R1, "M2": args.M2, "R2": args.R2, "tol_band": args.tol_band}
    return inputs, v.to_dict()


def _cmd_phase(args):
    from .intersect import phase_sweep

    M1, M2 = parse_orlicz(args.M1), parse_orlicz(args.M2)
    sweep = phase_sweep(M1, args.R1, M2, args.R2_grid, args.tol_band)
    inputs = {"M1": args.M1, "R1": args.R1, "M2": args.M2, "R2_grid": args.R2_grid}
    res = {
        "threshold": sweep.threshold,
        "threshold_moment": sweep.threshold_moment,
        "rows": [{"R2": r.R2, "verdict": r.verdict.value, "margin": r.margin} for r in sweep.rows],
    }
    return inputs, res, sweep


def _cmd_ss(args):
    from .intersect import ss_constant, ss_threshold_via_gibbs

    A = ss_constant(args.p, args.q)
    res = {"A_pq": A, "t_star": None, "bridge_residual": None}
    if math.isfinite(args.p):
        t = ss_threshold_via_gibbs(args.p, args.q)
        res.update(t_star=t, bridge_residual=t * A - 1.0)
    return {"p": args.p, "q": args.q}, res


def _cmd_vr(args):
    from .ratio import asymptotic_volume_ratio

    M = parse_orlicz(args.M)
    r = asymptotic_volume_ratio(M, tilt=_tilt(args, M, 1.0))
    return {"M": args.M}, r.to_dict()


def _cmd_sample(args):
    from .montecarlo import sample_gibbs

    M = parse_orlicz(args.M)
    tilt = _tilt(args, M, args.R)
    x = sample_gibbs(tilt, args.n, args.seed)
    inputs = {"M": args.M, "R": args.R, "n": args.n, "raw": args.raw}
    if args.raw:
        return inputs, {"draws": x}
    m = M(x)
    res = {
        "n": args.n,
        "mean": math.fsum(x) / x.size,
        "mean_M": math.fsum(m) / x.size,
        "std_err_mean_M": float(np.std(m) / math.sqrt(x.size)),
        "expected_mean_M": args.R,
        "variance": float(np.var(x)),
    }
    return inputs, res


def _cmd_mc_volume(args):
    from .montecarlo import estimate_log_volume
    from .volume import precise_log_volume

    M = parse_orlicz(args.M)
    tilt = _tilt(args, M, args.R)
    est = estimate_log_volume(M, args.R, args.d, args.n, args.seed, tilt=tilt, threads=args.threads, max_draws=args.max_draws)
    res = est.to_dict() | {"asymptotic_log": precise_log_volume(M, args.R, args.d, tilt).total_log}
    return {"M": args.M, "R": args.R, "d": args.d, "n": args.n}, res


def _cmd_mc_intersect(args):
    from .intersect import intersection_verdict
    from .montecarlo import estimate_intersection_ratio

    M1, M2 = parse_orlicz(args.M1), parse_orlicz(args.M2)
    tilt = _tilt(args, M1, args.R1)
    est = estimate_intersection_ratio(
        M1, args.R1, M2, args.R2, args.d, args.n, args.seed, tilt=tilt, threads=args.threads, max_draws=args.max_draws
    )
    verdict = intersection_verdict(M1, args.R1, M2, args.R2, tilt=tilt)
    res = est.to_dict() | {"asymptotic_verdict": verdict.verdict.value}
    inputs = {"M1": args.M1, "R1": args.R1, "M2": args.M2, "R2": args.R2, "d": args.d, "n": args.n}
    return inputs, res


def _cmd_diag_marginal(args):
    from .montecarlo import marginal_diagnostic

    M = parse_orlicz(args.M)
    tv = marginal_diagnostic(
        M, args.R, args.d, args.n, args.bins, args.seed,
        tilt=_tilt(args, M, args.R), threads=args.threads, max_draws=args.max_draws,
    )
    return {"M": args.M, "R": args.R, "d": args.d, "n": args.n, "bins": args.bins}, {"tv": tv}


def _cmd_diag_clt(args):
    from .montecarlo import clt_diagnostic, ks_null_band

    M = parse_orlicz(args.M)
    ks = clt_diagnostic(M, args.R, args.d, args.n, args.seed, tilt=_tilt(args, M, args.R), threads=args.threads)
    band = ks_null_band(args.n)
    return {"M": args.M, "R": args.R, "d": args.d, "n": args.n}, {"ks": ks, "null_band": band, "within_band": ks < band}


def _cmd_verify(args):
    from .acceptance import run_all

    results = run_all(skip_mc=args.skip_mc)
    return {"skip_mc": args.skip_mc}, {"checks": [r.to_dict() for r in results], "all_passed": all(r.passed for r in results)}, results


COMMANDS = {
    "volume": _cmd_volume,
    "tilt": _cmd_tilt,
    "intersect": _cmd_intersect,
    "phase": _cmd_phase,
    "ss": _cmd_ss,
    "vr": _cmd_vr,
    "sample": _cmd_sample,
    "mc-volume": _cmd_mc_volume,
    "mc-intersect": _cmd_mc_intersect,
    "diag-marginal": _cmd_diag_marginal,
    "diag-clt": _cmd_diag_clt,
    "verify": _cmd_verify,
}


def _report(args, inputs, results) -> dict:
    return {
        "tool_version": __version__,
        "subcommand": args.subcommand,
        "inputs": inputs,
        "results": results,
        "provenance": {"seed": args.seed, "tolerances": {"quad_tol": args.quad_tol, "root_tol": args.root_tol}},
    }


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    fmt = args.format or ("csv" if args.subcommand == "phase" else "json")
    if fmt == "csv" and args.subcommand != "phase":
        print(f"orlicz {args.subcommand}: csv output is only available for phase", file=sys.stderr)
        return 2

    try:
        out = COMMANDS[args.subcommand](args)
    except OrliczError as e:
        print(to_json({"tool_version": __version__, "subcommand": args.subcommand, "error": e.to_dict()}))
        return 1
    except ValueError as e:
        print(to_json({"tool_version": __version__, "subcommand": args.subcommand, "error": {"error": "ValueError", "message": str(e)}}))
        return 1
    inputs, results = out[0], out[1]

    if fmt == "csv":
        sweep = out[2]
        sys.stdout.write(sweep.to_csv())
        threshold = "none" if sweep.threshold is None else format(sweep.threshold, ".17g")
        print(f"threshold {threshold} (threshold_moment {sweep.threshold_moment:.17g})", file=sys.stderr)
    elif fmt == "human":
        if args.subcommand == "verify":
            for r in out[2]:
                print(r.line())
        else:
            print("\n".join(_human(results)))
    else:
        print(to_json(_report(args, inputs, results)))

    if args.subcommand == "verify" and not results["all_passed"]:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

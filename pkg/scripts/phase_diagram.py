"""Intersection phase diagram: asymptotic verdicts next to Monte Carlo ratios.

For each pair (M1, M2) the R2 grid is swept. Each row carries the limiting
verdict and margin plus the estimated volume fraction of B_M1(dR1) inside
B_M2(dR2) at each dimension in ``--dims``. The estimated fraction should
sharpen toward 0 or 1 as d grows, except near the threshold.

Usage:
    python scripts/phase_diagram.py > phase.csv
    python scripts/phase_diagram.py --dims 50 100 --n 20000 --points 9

Output: CSV on stdout, thresholds on stderr.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass

import numpy as np

from orlicz.function import parse_orlicz
from orlicz.intersect import phase_sweep, threshold_moment
from orlicz.montecarlo import estimate_intersection_ratio
from orlicz.tilt import solve_tilt


@dataclass(frozen=True)
class PhaseConfig:
    pairs: tuple[tuple[str, str], ...] = (("t^2", "abs(t)"), ("abs(t)", "t^2"), ("t^2", "abs(t)^4"))
    R1: float = 1.0
    span: float = 0.4
    points: int = 11
    dims: tuple[int, ...] = (25, 50, 100, 200)
    n: int = 50_000
    seed: int = 0
    threads: int | None = None


def run(cfg: PhaseConfig, out=sys.stdout, log=sys.stderr) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["M1", "M2", "R2", "verdict", "margin", "d", "ratio", "std_err"])
    for e1, e2 in cfg.pairs:
        M1, M2 = parse_orlicz(e1), parse_orlicz(e2)
        tilt = solve_tilt(M1, cfg.R1)
        m2 = threshold_moment(M1, cfg.R1, M2, tilt=tilt)
        grid = np.linspace(m2 * (1 - cfg.span), m2 * (1 + cfg.span), cfg.points)
        sweep = phase_sweep(M1, cfg.R1, M2, grid)
        print(f"{e1} vs {e2}: threshold {m2:.10g}", file=log)
        for row in sweep.rows:
            for d in cfg.dims:
                est = estimate_intersection_ratio(
                    M1, cfg.R1, M2, row.R2, d, cfg.n, cfg.seed, tilt=tilt, threads=cfg.threads
                )
                writer.writerow([e1, e2, f"{row.R2:.6g}", row.verdict.value, f"{row.margin:.6g}", d,
                                 f"{est.point:.6g}", f"{est.std_err:.3g}"])
            out.flush()


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dims", type=int, nargs="+", default=list(PhaseConfig.dims))
    ap.add_argument("--n", type=int, default=PhaseConfig.n)
    ap.add_argument("--points", type=int, default=PhaseConfig.points)
    ap.add_argument("--span", type=float, default=PhaseConfig.span, help="relative half-width around the threshold")
    ap.add_argument("--seed", type=int, default=PhaseConfig.seed)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args(argv)
    cfg = PhaseConfig(span=args.span, points=args.points, dims=tuple(args.dims), n=args.n,
                      seed=args.seed, threads=args.threads)
    run(cfg)


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Empirical vs exact critical erasure probability for a few small plants.

Usage: python scripts/threshold_sweep.py [--trials N] [--horizon H] [--seed S]
"""

import argparse
from fractions import Fraction

from erasurekf import Eigenvalue, diagonal_spec
from erasurekf.config import SimConfig
from erasurekf.spectral import bound_sandwich, critical_erasure
from erasurekf.sim import sweep_threshold

PLANTS = {
    "scalar 2": (diagonal_spec([Eigenvalue(2)], [[1]]), [0.05 * k for k in range(1, 10)]),
    "diag(2,-2)": (diagonal_spec([Eigenvalue(2), Eigenvalue(2, Fraction(1, 2))], [[1, 1]]),
                   [0.02 * k for k in range(1, 9)]),
    "diag(3,2,-2)": (diagonal_spec([Eigenvalue(3), Eigenvalue(2), Eigenvalue(2, Fraction(1, 2))],
                                   [[1, 1, 1]]), [0.02 * k for k in range(1, 9)]),
    "period 16, l=8": (diagonal_spec([Eigenvalue(2), Eigenvalue(2, Fraction(1, 16)),
                                      Eigenvalue(2, Fraction(9, 16))], [[1, 1, 1]]),
                       [0.02 * k for k in range(1, 9)]),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--horizon", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=SimConfig.seed)
    args = ap.parse_args()
    cfg = SimConfig(trials=args.trials, horizon=args.horizon, seed=args.seed)

    print(f"{'plant':<16} {'exact':>8} {'lower':>8} {'upper':>8}  empirical interval")
    for name, (spec, grid) in PLANTS.items():
        rep = critical_erasure(spec)
        lo, hi = bound_sandwich(spec)
        sw = sweep_threshold(spec, [round(g, 4) for g in grid], cfg)
        verdicts = " ".join(f"{p:.2f}:{c.verdict[0]}" for p, c in zip(sw.p_e, sw.classifications))
        print(f"{name:<16} {rep.critical:8.4f} {lo:8.4f} {hi:8.4f}  {sw.interval}  {verdicts}")
        if sw.diagnostic:
            print(f"{'':<16} note: {sw.diagnostic}")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Largest erasure probability a fixed-gain predictor tolerates, next to the exact threshold."""

import argparse
from fractions import Fraction

import numpy as np

from erasurekf import Eigenvalue, diagonal_spec
from erasurekf.config import StaticGainConfig
from erasurekf.spectral import critical_erasure
from erasurekf.staticgain import max_static_gain_erasure

CASES = [
    ("scalar 2", [[2.0]], [[1.0]], diagonal_spec([Eigenvalue(2)], [[1]])),
    ("lower triangular", [[1.25, 0], [1, 1.1]], [[1, 1]], diagonal_spec([1.25, 1.1], [[1.15, 1]])),
    ("diag(2,-2)", np.diag([2.0, -2.0]), [[1, 1]],
     diagonal_spec([Eigenvalue(2), Eigenvalue(2, Fraction(1, 2))], [[1, 1]])),
    ("diag(3,2,-2)", np.diag([3.0, 2.0, -2.0]), [[1, 1, 1]],
     diagonal_spec([3, Eigenvalue(2), Eigenvalue(2, Fraction(1, 2))], [[1, 1, 1]])),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=StaticGainConfig.seed)
    ap.add_argument("--restarts", type=int, default=StaticGainConfig.restarts)
    args = ap.parse_args()
    cfg = StaticGainConfig(seed=args.seed, restarts=args.restarts)
    print(f"{'plant':<18} {'static gain':>11} {'exact':>8}  gain")
    for name, A, C, jordan in CASES:
        res = max_static_gain_erasure(A, C, cfg)
        exact = critical_erasure(jordan).critical
        K = np.round(res.best_K.real.ravel(), 4).tolist()
        print(f"{name:<18} {res.p_lower_bound:11.4f} {exact:8.4f}  {K}")


if __name__ == "__main__":
    main()

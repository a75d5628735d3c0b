#!/usr/bin/env python3
"""Two ways of breaking an eigenvalue cycle: jittered sampling and a random output filter.

The continuous plant has modes ln2 and ln2 + j*pi. Sampled every second
those land on 2 and -2, a period-2 cycle with threshold 1/16. Jittering
the sample instants or mixing consecutive outputs with random weights
lifts the threshold back towards 1/4.
"""

import argparse
import math
from fractions import Fraction

import numpy as np

from erasurekf import Eigenvalue, diagonal_spec
from erasurekf.config import SimConfig
from erasurekf.sampling import ContinuousBlock, ContinuousSpec, filtered_model, uniform_vs_nonuniform_report
from erasurekf.sim import sweep_threshold


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--horizon", type=int, default=2000)
    ap.add_argument("--grid", default="0.03,0.05,0.08,0.1,0.15,0.2,0.3,0.35")
    args = ap.parse_args()
    cfg = SimConfig(trials=args.trials, horizon=args.horizon)
    grid = [float(x) for x in args.grid.split(",")]

    ln2 = math.log(2)
    cspec = ContinuousSpec((ContinuousBlock(ln2), ContinuousBlock(ln2, math.pi)),
                           np.eye(2), [[1, 1]], [[1]], I=1.0, T=0.5)
    for mode in ("weyl_sqrt2", "iid_uniform"):
        rep = uniform_vs_nonuniform_report(cspec, grid, cfg, mode)
        print(f"jitter {mode}: analytic uniform {rep['analytic']['uniform']:.4f}, "
              f"jittered {rep['analytic']['nonuniform']:.4f}")
        for label in ("uniform", "nonuniform"):
            pts = " ".join(f"{r['p_e']}:{r['verdict'][0]}" for r in rep[label]["points"])
            print(f"  {label:<10} interval {rep[label]['interval']}  {pts}")

    spec = diagonal_spec([Eigenvalue(2), Eigenvalue(2, Fraction(1, 2))], [[1, 1]])
    rng = np.random.default_rng(1)
    model = filtered_model(spec, rng.uniform(0, 1, cfg.horizon), rng.uniform(0, 1, cfg.horizon))
    sw = sweep_threshold(model, grid, cfg)
    pts = " ".join(f"{p}:{c.verdict[0]}" for p, c in zip(sw.p_e, sw.classifications))
    print(f"output filter on diag(2,-2): interval {sw.interval}  {pts}")


if __name__ == "__main__":
    main()

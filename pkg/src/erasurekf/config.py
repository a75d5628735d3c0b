"""Tunable knobs shared by the analysis, search and simulation layers."""

from __future__ import annotations

import os
from dataclasses import dataclass

DEFAULT_SEED = 20240607
WORKERS_ENV = "ERASUREKF_WORKERS"


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass(frozen=True)
class AnalysisConfig:
    rel_tol: float = 1e-9
    # magnitudes closer than this (relative) are treated as equal inside cycles
    mag_rel_tol: float = 1e-9
    max_period: int = 24
    # survivor patterns enumerated for parallel channels
    parallel_budget: int = 2**20
    max_den: int = 64
    phase_tol: float = 1e-9


@dataclass(frozen=True)
class StaticGainConfig:
    restarts: int = 5
    max_evals: int = 2000
    bisection_tol: float = 1e-3
    eps_margin: float = 1e-9
    perturbation: float = 1.0
    seed: int = DEFAULT_SEED


@dataclass(frozen=True)
class SimConfig:
    trials: int = 200
    horizon: int = 2000
    seed: int = DEFAULT_SEED
    workers: int | None = None
    # verdict band on the running-max growth exponent; 1 is the critical value
    exponent_lo: float = 0.9
    exponent_hi: float = 1.1
    overflow: float = 1e250

    def resolved_workers(self) -> int:
        return self.workers if self.workers is not None else default_workers()

"""Critical erasure probabilities for Kalman filtering over lossy links."""

from .config import AnalysisConfig, SimConfig, StaticGainConfig
from .model import (
    Eigenvalue,
    Irrational,
    JordanBlock,
    SystemSpec,
    approximate_rational_phase,
    diagonal_spec,
    matrix_from_jordan,
    observable_eigen_report,
    rank_with_tolerance,
)
from .spectral import (
    CriticalReport,
    EigenvalueCycle,
    EnumerationCapError,
    ParallelSpec,
    bound_sandwich,
    compute_l,
    critical_erasure,
    critical_no_cycle_fastpath,
    parallel_stability_margin,
    partition_cycles,
)
from .staticgain import erasure_lyapunov_radius, lyapunov_stable, max_static_gain_erasure
from .sim import classify_boundedness, kalman_covariance_step, run_ensemble, run_trial, sweep_threshold

__version__ = "0.1.0"

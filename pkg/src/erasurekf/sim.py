"""Monte-Carlo covariance simulation under Bernoulli erasures.

Only the prediction covariance is propagated: it is a deterministic function
of the erasure pattern, so the erasure bits are the sole source of randomness.
Trial ``k`` draws its uniforms from ``PCG64(SeedSequence([seed, k]))`` and a
slot is received when ``u >= p_e``; the same uniforms are reused across a
p_e grid (common random numbers), which keeps sweeps monotone per trial.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import SimConfig
from .model import SystemSpec, as_complex_matrix

VERDICTS = ("bounded", "inconclusive", "divergent")


@dataclass(frozen=True)
class ErasureModel:
    p_e: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_e <= 1.0:
            raise ValueError(f"p_e must lie in [0, 1], got {self.p_e}")


@dataclass(frozen=True)
class CovarianceState:
    sigma: np.ndarray
    step: int = 0
    gain: np.ndarray | None = None


@dataclass(frozen=True)
class TimeVaryingModel:
    """Per-step (A, C, W = B Q B^H, R) stacks; a leading length of 1 means constant."""

    A: np.ndarray
    C: np.ndarray
    W: np.ndarray
    R: np.ndarray
    sigma0: np.ndarray

    def __post_init__(self):
        A, C, W, R = (np.asarray(x, dtype=complex) for x in (self.A, self.C, self.W, self.R))
        A, C, W, R = (x[None] if x.ndim == 2 else x for x in (A, C, W, R))
        m, l = A.shape[1], C.shape[1]
        if A.shape[1:] != (m, m) or C.shape[2] != m or W.shape[1:] != (m, m) or R.shape[1:] != (l, l):
            raise ValueError("inconsistent model dimensions")
        S0 = np.asarray(self.sigma0, dtype=complex)
        if S0.shape != (m, m):
            raise ValueError(f"sigma0 must be {m}x{m}")
        for name, x in (("A", A), ("C", C), ("W", W), ("R", R), ("sigma0", S0)):
            object.__setattr__(self, name, x)

    @property
    def m(self) -> int:
        return self.A.shape[1]

    @property
    def length(self) -> int | None:
        """Number of distinct steps available, or None when time-invariant."""
        lens = {x.shape[0] for x in (self.A, self.C, self.W, self.R) if x.shape[0] > 1}
        return min(lens) if lens else None

    def at(self, n: int):
        pick = lambda x: x[n] if x.shape[0] > 1 else x[0]
        return pick(self.A), pick(self.C), pick(self.W), pick(self.R)

    @classmethod
    def from_spec(cls, spec: SystemSpec, Q=None, R=None, sigma0=None) -> "TimeVaryingModel":
        g, l, m = spec.B.shape[1], spec.C.shape[0], spec.m
        Q = np.eye(g) if Q is None else as_complex_matrix(Q, "Q")
        R = np.eye(l) if R is None else as_complex_matrix(R, "R")
        W = spec.B @ Q @ spec.B.conj().T
        return cls(spec.A, spec.C, W, R, np.eye(m) if sigma0 is None else sigma0)

    @classmethod
    def from_matrices(cls, A, C, B=None, Q=None, R=None, sigma0=None) -> "TimeVaryingModel":
        A = np.asarray(A, dtype=complex)
        C = np.asarray(C, dtype=complex)
        m = A.shape[-1]
        l = C.shape[-2]
        B = np.eye(m) if B is None else np.asarray(B, dtype=complex)
        Q = np.eye(B.shape[-1]) if Q is None else np.asarray(Q, dtype=complex)
        W = B @ Q @ np.swapaxes(B.conj(), -1, -2)
        return cls(A, C, W, np.eye(l) if R is None else R, np.eye(m) if sigma0 is None else sigma0)


def _ct(X: np.ndarray) -> np.ndarray:
    return np.swapaxes(X.conj(), -1, -2)


def _hermitian(S: np.ndarray) -> np.ndarray:
    return 0.5 * (S + _ct(S))


def riccati_step(S: np.ndarray, received: np.ndarray, A, C, W, R) -> np.ndarray:
    """One Joseph-form prediction update for a stack of covariances (K, m, m)."""
    SCH = S @ _ct(C)
    # L = S C^H (C S C^H + R)^-1 via a solve on the Hermitian innovation matrix
    L = _ct(np.linalg.solve(C @ SCH + R, _ct(SCH)))
    L = L * received[:, None, None]
    AL = A @ L
    M = A - AL @ C
    out = M @ S @ _ct(M) + AL @ R @ _ct(AL) + W
    return _hermitian(out)


def kalman_covariance_step(state: CovarianceState, beta: int, spec: SystemSpec, Q=None, R=None,
                           psd_tol: float = 1e-10) -> CovarianceState:
    S = np.asarray(state.sigma, dtype=complex)
    if np.max(np.abs(S - S.conj().T)) > 1e-12 * max(1.0, np.max(np.abs(S))):
        raise ValueError("covariance is not Hermitian")
    if np.linalg.eigvalsh(_hermitian(S))[0] < -psd_tol * max(1.0, np.max(np.abs(S))):
        raise ValueError("covariance is not positive semidefinite")
    model = TimeVaryingModel.from_spec(spec, Q, R)
    A, C, W, Rm = model.at(0)
    received = np.array([1.0 if beta else 0.0])
    CH = C.conj().T
    L = S @ CH @ np.linalg.inv(C @ S @ CH + Rm) * received[0]
    new = riccati_step(S[None], received, A, C, W, Rm)[0]
    return CovarianceState(new, state.step + 1, L)


def trial_uniforms(seed: int, trial: int, horizon: int) -> np.ndarray:
    return np.random.default_rng(np.random.SeedSequence([seed, trial])).random(horizon)


def _run_chunk(model: TimeVaryingModel, p_e: float, seed: int, trials: range,
               horizon: int, overflow: float) -> np.ndarray:
    K = len(trials)
    u = np.stack([trial_uniforms(seed, k, horizon) for k in trials]) if K else np.zeros((0, horizon))
    received = (u >= p_e).astype(float)
    S = np.broadcast_to(model.sigma0, (K, model.m, model.m)).copy()
    out = np.full((K, horizon), np.inf)
    alive = np.ones(K, dtype=bool)
    for n in range(horizon):
        if not alive.any():
            break
        A, C, W, R = model.at(n)
        idx = np.flatnonzero(alive)
        S[idx] = riccati_step(S[idx], received[idx, n], A, C, W, R)
        tr = np.einsum("kii->k", S[idx]).real
        bad = ~(tr <= overflow)
        out[idx[~bad], n] = tr[~bad]
        if bad.any():
            alive[idx[bad]] = False
            S[idx[bad]] = np.eye(model.m)
    return out


@dataclass
class TraceEnsemble:
    traces: np.ndarray  # (trials, horizon); inf after an overflow
    p_e: float
    horizon: int

    @property
    def diverged(self) -> np.ndarray:
        return ~np.all(np.isfinite(self.traces), axis=1)

    def summary(self) -> dict:
        """Per-step mean trace and 10/90 percentiles over trials."""
        with np.errstate(invalid="ignore"):
            return {"mean": self.traces.mean(axis=0),
                    "q10": np.quantile(self.traces, 0.1, axis=0),
                    "q90": np.quantile(self.traces, 0.9, axis=0)}


def _chunks(trials: int, workers: int) -> list[range]:
    workers = max(1, min(workers, trials))
    bounds = np.linspace(0, trials, workers + 1).astype(int)
    return [range(a, b) for a, b in zip(bounds[:-1], bounds[1:])]


def run_ensemble(model, p_e: float, cfg: SimConfig | None = None) -> TraceEnsemble:
    cfg = cfg or SimConfig()
    if isinstance(model, SystemSpec):
        model = TimeVaryingModel.from_spec(model)
    if cfg.horizon < 1:
        raise ValueError("horizon must be >= 1")
    if model.length is not None and model.length < cfg.horizon:
        raise ValueError(f"model covers {model.length} steps, horizon is {cfg.horizon}")
    ErasureModel(p_e, cfg.seed)
    chunks = _chunks(cfg.trials, cfg.resolved_workers())
    args = [(model, p_e, cfg.seed, c, cfg.horizon, cfg.overflow) for c in chunks]
    if len(chunks) == 1:
        parts = [_run_chunk(*args[0])]
    else:
        with ProcessPoolExecutor(max_workers=len(chunks)) as ex:
            parts = list(ex.map(_run_chunk, *zip(*args)))
    return TraceEnsemble(np.concatenate(parts, axis=0), p_e, cfg.horizon)


@dataclass
class TrialResult:
    traces: np.ndarray
    diverged: bool


def run_trial(spec, model: ErasureModel, horizon: int, trial: int = 0,
              overflow: float = 1e250) -> TrialResult:
    """Trace of the prediction covariance along one erasure realisation.

    After an overflow the sequence is truncated and ``diverged`` is set.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    tv = TimeVaryingModel.from_spec(spec) if isinstance(spec, SystemSpec) else spec
    tr = _run_chunk(tv, model.p_e, model.seed, range(trial, trial + 1), horizon, overflow)[0]
    finite = np.isfinite(tr)
    if finite.all():
        return TrialResult(tr, False)
    return TrialResult(tr[:int(np.argmin(finite))], True)


def log_trace_slope(traces) -> float:
    """Least-squares slope of log trace against step."""
    y = np.log(np.asarray(traces, dtype=float))
    if y.size < 2:
        return 0.0
    return float(np.polyfit(np.arange(y.size), y, 1)[0])


@dataclass
class Classification:
    verdict: str
    growth_exponent: float
    mean_log_slope: float
    diverged_trials: int = 0


def growth_exponent(log_traces: np.ndarray, n_points: int = 48) -> float:
    """Slope of the trial-averaged running max of log trace against log(step).

    Below the critical erasure probability the running max grows like
    ``g * log n`` with ``g < 1`` (the stationary trace has a power-law tail
    with finite mean); above it ``g > 1``; geometric blow-up gives ``g >> 1``.
    The fit uses geometrically spaced steps over the last five octaves.
    """
    H = log_traces.shape[1]
    run_max = np.maximum.accumulate(log_traces, axis=1).mean(axis=0)
    steps = np.unique(np.geomspace(max(1, H // 32), H, n_points).astype(int))
    return float(np.polyfit(np.log(steps), run_max[steps - 1], 1)[0])


def classify_boundedness(ensemble: TraceEnsemble, cfg: SimConfig | None = None) -> Classification:
    cfg = cfg or SimConfig()
    tr = ensemble.traces
    H = tr.shape[1]
    if H < 64:
        raise ValueError("horizon must be at least 64 steps to classify")
    n_div = int(ensemble.diverged.sum())
    if n_div:
        return Classification("divergent", math.inf, math.inf, n_div)
    logs = np.log(tr)
    half = np.arange(H // 2, H)
    slope = float(np.polyfit(half, logs[:, half].mean(axis=0), 1)[0])
    g = growth_exponent(logs)
    if g > cfg.exponent_hi:
        verdict = "divergent"
    elif g < cfg.exponent_lo:
        verdict = "bounded"
    else:
        verdict = "inconclusive"
    return Classification(verdict, g, slope, 0)


@dataclass
class SweepResult:
    p_e: list[float]
    classifications: list[Classification]
    interval: tuple[float, float]
    monotone: bool
    diagnostic: str = ""
    extra: dict = field(default_factory=dict)

    def csv(self) -> str:
        lines = ["p_e,verdict,slope"]
        for p, c in zip(self.p_e, self.classifications):
            lines.append(f"{p!r},{c.verdict},{c.growth_exponent!r}")
        return "\n".join(lines) + "\n"

    def interval_dict(self) -> dict:
        return {"empirical_interval": list(self.interval), "monotone": self.monotone,
                "diagnostic": self.diagnostic}


def bracket(grid, verdicts) -> tuple[tuple[float, float], bool, str]:
    """Empirical threshold interval from per-grid-point verdicts.

    Expects bounded..., then at most one contiguous run of inconclusive
    points, then divergent...; anything else is reported with a diagnostic
    and a best-effort interval.
    """
    grid = list(grid)
    div = [p for p, v in zip(grid, verdicts) if v == "divergent"]
    hi = min(div) if div else 1.0
    below = [p for p, v in zip(grid, verdicts) if v == "bounded" and p < hi]
    lo = max(below) if below else 0.0
    problems = []
    bounded_above = [p for p, v in zip(grid, verdicts) if v == "bounded" and p > hi]
    if bounded_above:
        problems.append(f"bounded above first divergent point {hi}: {bounded_above}")
    if any(v != "inconclusive" for p, v in zip(grid, verdicts) if lo < p < hi):
        problems.append(f"unexpected verdicts inside ({lo}, {hi})")
    stray = [p for p, v in zip(grid, verdicts) if v == "inconclusive" and not lo < p < hi]
    if stray:
        problems.append(f"inconclusive points outside the gap: {stray}")
    return (lo, hi), not problems, "; ".join(problems)


def sweep_threshold(model, grid, cfg: SimConfig | None = None) -> SweepResult:
    cfg = cfg or SimConfig()
    grid = [float(p) for p in grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be sorted ascending")
    if isinstance(model, SystemSpec):
        model = TimeVaryingModel.from_spec(model)
    cls = [classify_boundedness(run_ensemble(model, p, cfg), cfg) for p in grid]
    interval, mono, diag = bracket(grid, [c.verdict for c in cls])
    return SweepResult(grid, cls, interval, mono, diag)

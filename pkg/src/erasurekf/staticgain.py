"""Static-gain estimator under erasures.

The estimator ``xhat+ = A xhat - beta K (y - C xhat)`` (written here with
``F = A + K C`` as the closed-loop matrix) has mean-square bounded error iff
the lifted second-moment operator

    X -> p_e A X A^H + (1 - p_e) F X F^H

has spectral radius below one. Searching over K and bisecting on p_e gives a
certified lower bound on the critical erasure probability.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_discrete_are
from scipy.optimize import minimize

from .config import StaticGainConfig
from .model import SystemSpec, as_complex_matrix


@dataclass(frozen=True)
class FeasibilityResult:
    spectral_radius: float
    feasible: bool


@dataclass
class StaticGainResult:
    p_lower_bound: float
    best_K: np.ndarray
    budget_exhausted: bool
    evaluations: int

    def to_dict(self) -> dict:
        K = np.asarray(self.best_K)
        return {"p_lower_bound": self.p_lower_bound,
                "K": [[[float(z.real), float(z.imag)] for z in row] for row in K],
                "budget_exhausted": self.budget_exhausted,
                "evaluations": self.evaluations}


def spectral_radius(M) -> float:
    M = np.asarray(M)
    if M.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def lifted_operator(A, C, K, p_e: float) -> np.ndarray:
    """Matrix of X -> p_e A X A^H + (1-p_e) F X F^H acting on vec(X)."""
    F = A + K @ C
    return p_e * np.kron(A.conj(), A) + (1.0 - p_e) * np.kron(F.conj(), F)


def erasure_lyapunov_radius(A, C, K, p_e: float, eps_margin: float = 1e-9) -> FeasibilityResult:
    A = as_complex_matrix(A, "A")
    C = as_complex_matrix(C, "C")
    K = as_complex_matrix(K, "K")
    m = A.shape[0]
    if A.shape != (m, m):
        raise ValueError(f"A must be square, got {A.shape}")
    if C.shape[1] != m:
        raise ValueError(f"C has {C.shape[1]} columns, expected {m}")
    if K.shape != (m, C.shape[0]):
        raise ValueError(f"K must be {m}x{C.shape[0]}, got {K.shape}")
    if not 0.0 <= p_e <= 1.0:
        raise ValueError("p_e must lie in [0, 1]")
    rho = spectral_radius(lifted_operator(A, C, K, p_e))
    return FeasibilityResult(rho, rho < 1.0 - eps_margin)


def lyapunov_stable(A) -> bool:
    A = as_complex_matrix(A, "A")
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"A must be square, got {A.shape}")
    return spectral_radius(A) < 1.0


def kalman_predictor_seed(A, C) -> np.ndarray:
    """-(stationary predictor gain) of the erasure-free filter, or zeros if the DARE fails."""
    m, l = A.shape[0], C.shape[0]
    try:
        P = solve_discrete_are(A.conj().T, C.conj().T, np.eye(m), np.eye(l))
    except (np.linalg.LinAlgError, ValueError):
        return np.zeros((m, l), dtype=complex)
    S = C @ P @ C.conj().T + np.eye(l)
    return -(A @ P @ C.conj().T @ np.linalg.inv(S))


class _Certified(Exception):
    def __init__(self, x):
        self.x = x


def _pack(K: np.ndarray) -> np.ndarray:
    return np.concatenate([K.real.ravel(), K.imag.ravel()])


def _unpack(x: np.ndarray, shape) -> np.ndarray:
    n = x.size // 2
    return (x[:n] + 1j * x[n:]).reshape(shape)


def _search_gain(A, C, p_e, starts, rng, cfg: StaticGainConfig):
    """Try to find K with radius < 1 - eps; returns (K or None, evaluations)."""
    shape = (A.shape[0], C.shape[0])
    target = 1.0 - cfg.eps_margin
    AA = p_e * np.kron(A.conj(), A)
    evals = 0

    def radius(x):
        nonlocal evals
        evals += 1
        F = A + _unpack(x, shape) @ C
        rho = spectral_radius(AA + (1.0 - p_e) * np.kron(F.conj(), F))
        if rho < target:
            raise _Certified(x.copy())
        return rho

    x_starts = [_pack(K) for K in starts]
    scale = max(1.0, float(np.max(np.abs(x_starts[0])))) * cfg.perturbation
    for _ in range(cfg.restarts):
        x_starts.append(x_starts[0] + scale * rng.standard_normal(x_starts[0].size))
    per_start = max(1, cfg.max_evals // len(x_starts))
    try:
        for x0 in x_starts:
            if evals >= cfg.max_evals:
                break
            minimize(radius, x0, method="Nelder-Mead",
                     options={"maxfev": min(per_start, cfg.max_evals - evals),
                              "xatol": 1e-10, "fatol": 1e-12, "adaptive": True})
    except _Certified as hit:
        return _unpack(hit.x, shape), evals
    return None, evals


def max_static_gain_erasure(spec_or_A, C=None, cfg: StaticGainConfig | None = None) -> StaticGainResult:
    """Largest p_e (to bisection tolerance) for which some static gain is certified.

    Accepts a SystemSpec or an explicit (A, C) pair; A need not be in Jordan form.
    """
    cfg = cfg or StaticGainConfig()
    if isinstance(spec_or_A, SystemSpec):
        A, C = spec_or_A.A, spec_or_A.C
    else:
        A, C = as_complex_matrix(spec_or_A, "A"), as_complex_matrix(C, "C")
    m, l = A.shape[0], C.shape[0]
    zero = np.zeros((m, l), dtype=complex)
    rho_A = spectral_radius(A)
    if rho_A < 1.0:
        return StaticGainResult(1.0, zero, False, 0)

    seed_K = kalman_predictor_seed(A, C)
    total = 0
    hi = min(1.0, 1.0 / rho_A**2)
    # p_e = 0 must be certified first; otherwise nothing is known
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0]))
    K0, n = _search_gain(A, C, 0.0, [seed_K], rng, cfg)
    total += n
    if K0 is None:
        return StaticGainResult(0.0, seed_K, True, total)
    lo, best = 0.0, K0
    step = 1
    while hi - lo > cfg.bisection_tol:
        mid = 0.5 * (lo + hi)
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, step]))
        K, n = _search_gain(A, C, mid, [best, seed_K], rng, cfg)
        total += n
        if K is None:
            hi = mid
        else:
            lo, best = mid, K
        step += 1
    return StaticGainResult(lo, best, False, total)

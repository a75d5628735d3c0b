"""Independent reference computations used only by the tests.

None of these import the package's rank search or Riccati code: they work
from raw complex eigenvalues, plain ``numpy.linalg.matrix_rank`` and scipy
solvers, so agreement with the package is a genuine two-route check.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad_vec
from scipy.linalg import expm, solve_discrete_are


def brute_force_l(eigs: list[complex], C_i: np.ndarray, period: int) -> int:
    """Minimum number of erased slots over ALL subsets of one period (no early exit)."""
    C_i = np.atleast_2d(np.asarray(C_i, dtype=complex))
    eigs = np.asarray(eigs, dtype=complex)
    nu = eigs.size
    mag = abs(eigs[0])
    rows = [C_i * (eigs / mag) ** s for s in range(period)]
    best = period
    for mask in range(1 << period):
        surv = [rows[s] for s in range(period) if mask >> s & 1]
        rank = np.linalg.matrix_rank(np.vstack(surv), tol=1e-8) if surv else 0
        if rank < nu:
            best = min(best, period - len(surv))
    return best


def threshold_from_l(mag: float, period: int, l: int) -> float:
    if l == 0:
        return 0.0 if mag >= 1 else 1.0
    return min(1.0, mag ** (-2 * period / l))


def scalar_riccati(a: float, c: float, b: float, sigma: float, q: float, r: float, received: bool) -> float:
    if not received:
        return a * a * sigma + b * b * q
    return a * a * sigma - (a * sigma * c) ** 2 / (c * c * sigma + r) + b * b * q


def stationary_prediction_cov(A, C, W, R) -> np.ndarray:
    """Fixed point of the erasure-free prediction Riccati equation via scipy's DARE."""
    return solve_discrete_are(np.asarray(A).conj().T, np.asarray(C).conj().T, W, R)


def expm_integral_quadrature(A: np.ndarray, a: float, b: float) -> np.ndarray:
    val, _ = quad_vec(lambda s: expm(A * s), a, b, epsabs=1e-13, epsrel=1e-13)
    return val


def dense_jordan(eig_sizes) -> np.ndarray:
    m = sum(k for _, k in eig_sizes)
    A = np.zeros((m, m), dtype=complex)
    pos = 0
    for lam, k in eig_sizes:
        for i in range(k):
            A[pos + i, pos + i] = lam
            if i + 1 < k:
                A[pos + i, pos + i + 1] = 1
        pos += k
    return A


def primes_distinct_residue_draws(p: int, nu: int, rng) -> list[int]:
    return sorted(rng.choice(p, size=nu, replace=False).tolist())


def euler_maruyama_window_residual(lam: float, b: float, c: float, d: float, I: float,
                                   paths: int, steps: int, rng) -> np.ndarray:
    """Samples of int_0^I c x dt - Cbar x(I) + d V(I) for a scalar SDE started at 0."""
    dt = I / steps
    x = np.zeros(paths)
    integral = np.zeros(paths)
    V = np.zeros(paths)
    for _ in range(steps):
        dW = rng.standard_normal(paths) * math.sqrt(dt)
        dV = rng.standard_normal(paths) * math.sqrt(dt)
        x_new = x + lam * x * dt + b * dW
        integral += c * 0.5 * (x + x_new) * dt
        V += dV
        x = x_new
    cbar = c * (1 - math.exp(-lam * I)) / lam if lam != 0 else c * I
    return integral - cbar * x + d * V


"""Continuous-time plants sampled by an integrating, possibly jittered, sampler.

The plant ``dx = A_c x dt + B_c dW``, observed through ``dy = C_c x dt + D_c dV``,
is sampled at instants ``tau_n = (n + 1) I - t_n``; each sample integrates the
output over the preceding window of length ``I``. Because the window is
anchored at the sample instant, the observation matrix ``C_c int_{-I}^0 e^{A_c s} ds``
does not depend on the jitter, while the transition matrices do.

Everything runs on a Jordan-form ``A_c`` so exponentials and their integrals
have closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import AnalysisConfig, SimConfig
from .model import (
    Eigenvalue,
    JordanBlock,
    SystemSpec,
    approximate_rational_phase,
    as_complex_matrix,
    block_offsets,
    rank_with_tolerance,
)
from .sim import TimeVaryingModel, sweep_threshold

JITTER_MODES = ("none", "iid_uniform", "general_density", "weyl_sqrt2", "interval_variant")
SQRT2 = math.sqrt(2.0)
QUAD_STEPS_PER_INTERVAL = 512


@dataclass(frozen=True)
class ContinuousBlock:
    re: float
    im: float = 0.0
    size: int = 1

    def __post_init__(self):
        if not (math.isfinite(self.re) and math.isfinite(self.im)):
            raise ValueError("continuous eigenvalue must be finite")
        if int(self.size) != self.size or self.size < 1:
            raise ValueError("block size must be a positive integer")
        object.__setattr__(self, "re", float(self.re))
        object.__setattr__(self, "im", float(self.im))
        object.__setattr__(self, "size", int(self.size))

    @property
    def lam(self) -> complex:
        return complex(self.re, self.im)


@dataclass(frozen=True)
class ContinuousSpec:
    blocks: tuple[ContinuousBlock, ...]
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    I: float = 1.0
    T: float | None = None  # jitter window, defaults to I/2
    jitter_mode: str = "none"
    jitter_density: dict | None = None

    def __post_init__(self):
        blocks = tuple(self.blocks)
        if not blocks:
            raise ValueError("continuous spec needs at least one block")
        m = sum(b.size for b in blocks)
        B, C, D = (as_complex_matrix(x, n) for x, n in ((self.B, "B_c"), (self.C, "C_c"), (self.D, "D_c")))
        if B.shape[0] != m:
            raise ValueError(f"B_c has {B.shape[0]} rows, expected {m}")
        if C.shape[1] != m:
            raise ValueError(f"C_c has {C.shape[1]} columns, expected {m}")
        if D.shape != (C.shape[0], C.shape[0]):
            raise ValueError(f"D_c must be {C.shape[0]}x{C.shape[0]}")
        if rank_with_tolerance(D) < D.shape[0]:
            raise ValueError("D_c must be invertible")
        if not (self.I > 0 and math.isfinite(self.I)):
            raise ValueError("sampling interval I must be positive")
        T = 0.5 * self.I if self.T is None else float(self.T)
        if not (T >= 0 and math.isfinite(T)):
            raise ValueError("jitter window T must be >= 0")
        if self.jitter_mode not in JITTER_MODES:
            raise ValueError(f"unknown jitter mode {self.jitter_mode!r}; choose from {JITTER_MODES}")
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "I", float(self.I))
        object.__setattr__(self, "T", T)

    @property
    def m(self) -> int:
        return sum(b.size for b in self.blocks)

    @property
    def A(self) -> np.ndarray:
        return jordan_matrix(self.blocks)

    def with_mode(self, mode: str, density: dict | None = None) -> "ContinuousSpec":
        return ContinuousSpec(self.blocks, self.B, self.C, self.D, self.I, self.T, mode,
                              density if density is not None else self.jitter_density)

    def __eq__(self, other):
        if not isinstance(other, ContinuousSpec):
            return NotImplemented
        return (self.blocks == other.blocks and all(np.array_equal(a, b) for a, b in
                ((self.B, other.B), (self.C, other.C), (self.D, other.D)))
                and self.I == other.I and self.T == other.T and self.jitter_mode == other.jitter_mode
                and self.jitter_density == other.jitter_density)

    __hash__ = None


def _as_blocks(blocks) -> list[ContinuousBlock]:
    out = []
    for b in blocks:
        if isinstance(b, ContinuousBlock):
            out.append(b)
        else:
            lam, size = b if isinstance(b, tuple) else (b, 1)
            lam = complex(lam)
            out.append(ContinuousBlock(lam.real, lam.imag, size))
    return out


def jordan_matrix(blocks) -> np.ndarray:
    blocks = _as_blocks(blocks)
    m = sum(b.size for b in blocks)
    A = np.zeros((m, m), dtype=complex)
    for off, b in zip(block_offsets(blocks), blocks):
        for i in range(b.size):
            A[off + i, off + i] = b.lam
            if i + 1 < b.size:
                A[off + i, off + i + 1] = 1.0
    return A


def _fill_toeplitz(blocks, values_per_block, n_t: int) -> np.ndarray:
    """Assemble (n_t, m, m) block-diagonal upper-Toeplitz stacks from diagonals.

    ``values_per_block[b][k]`` is the k-th superdiagonal of block b, shape (n_t,).
    """
    m = sum(b.size for b in blocks)
    out = np.zeros((n_t, m, m), dtype=complex)
    for off, b, vals in zip(block_offsets(blocks), blocks, values_per_block):
        for k in range(b.size):
            i = np.arange(b.size - k)
            out[:, off + i, off + i + k] = vals[k][:, None]
    return out


def jordan_expm_stack(blocks, ts) -> np.ndarray:
    """``exp(A t)`` for every t in ``ts``; entry (i, i+k) of a block is t^k/k! e^{lam t}."""
    blocks = _as_blocks(blocks)
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    if not np.all(np.isfinite(ts)):
        raise ValueError("t must be finite")
    vals = []
    for b in blocks:
        e = np.exp(b.lam * ts)
        vals.append([ts**k / math.factorial(k) * e for k in range(b.size)])
    return _fill_toeplitz(blocks, vals, ts.size)


def jordan_expm(blocks, t: float) -> np.ndarray:
    return jordan_expm_stack(blocks, [t])[0]


_SERIES_TERMS = 40


def _int_monomial_exp(lam: complex, k: int, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``int_a^b s^k/k! e^{lam s} ds`` elementwise."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    reach = abs(lam) * np.maximum(np.abs(a), np.abs(b))
    small = reach < 0.5
    out = np.zeros(np.broadcast(a, b).shape, dtype=complex)
    if np.any(small):
        # power series of the exponential, integrated term by term
        acc = np.zeros_like(out)
        coef = 1.0 / math.factorial(k)
        for n in range(_SERIES_TERMS):
            e = k + n + 1
            acc = acc + coef * (lam**n) * (b**e - a**e) / e
            coef /= n + 1
        out = np.where(small, acc, out)
    if not np.all(small):
        def anti(s):
            tot = 0
            for r in range(k + 1):
                tot = tot + (-1) ** r * s ** (k - r) / (math.factorial(k - r) * lam ** (r + 1))
            return np.exp(lam * s) * tot
        with np.errstate(divide="ignore", invalid="ignore"):
            closed = anti(b) - anti(a)
        out = np.where(small, out, closed)
    return out


def integrate_expm_stack(blocks, a, b) -> np.ndarray:
    """``int_a^b exp(A s) ds`` in closed form, broadcast over arrays a, b."""
    blocks = _as_blocks(blocks)
    a, b = np.broadcast_arrays(np.atleast_1d(np.asarray(a, float)), np.atleast_1d(np.asarray(b, float)))
    vals = [[_int_monomial_exp(blk.lam, k, a, b) for k in range(blk.size)] for blk in blocks]
    return _fill_toeplitz(blocks, vals, a.size)


def integrate_expm(blocks, a: float, b: float) -> np.ndarray:
    return integrate_expm_stack(blocks, [a], [b])[0]


def integrated_C(cspec: ContinuousSpec, window: float | None = None) -> np.ndarray:
    """Observation matrix of an integrating sampler whose window ends at the sample instant."""
    L = cspec.I if window is None else window
    return cspec.C @ integrate_expm(cspec.blocks, -L, 0.0)


@dataclass(frozen=True)
class JitterSequence:
    mode: str
    values: np.ndarray
    T: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size and (v.min() < 0 or v.max() > self.T):
            raise ValueError("jitter values must lie in [0, T]")
        object.__setattr__(self, "values", v)


def _density_sampler(desc: dict):
    """Inverse-CDF sampler on [0, 1] for a bounded density descriptor."""
    kind = desc.get("type")
    if kind == "piecewise":
        edges = np.asarray(desc["edges"], dtype=float)
        dens = np.asarray(desc["density"], dtype=float)
        if edges.ndim != 1 or dens.shape != (edges.size - 1,) or edges.size < 2:
            raise ValueError("piecewise density needs len(density) == len(edges) - 1")
        if edges[0] < 0 or edges[-1] > 1 or np.any(np.diff(edges) <= 0):
            raise ValueError("piecewise edges must increase within [0, 1]")
        if not np.all(np.isfinite(dens)) or np.any(dens < 0):
            raise ValueError("density must be finite and nonnegative (bounded)")
        mass = dens * np.diff(edges)
        if mass.sum() <= 0:
            raise ValueError("density has zero mass")
        cdf = np.concatenate([[0.0], np.cumsum(mass) / mass.sum()])

        def sample(u):
            j = np.clip(np.searchsorted(cdf, u, side="right") - 1, 0, dens.size - 1)
            # zero-mass pieces are skipped by searchsorted
            frac = (u - cdf[j]) / np.where(cdf[j + 1] > cdf[j], cdf[j + 1] - cdf[j], 1.0)
            return edges[j] + frac * (edges[j + 1] - edges[j])
        return sample
    if kind == "beta":
        a, b = float(desc["a"]), float(desc["b"])
        if a < 1 or b < 1:
            raise ValueError("beta density with a < 1 or b < 1 is unbounded")
        from scipy.stats import beta as beta_dist
        return lambda u: beta_dist.ppf(u, a, b)
    raise ValueError(f"unknown density descriptor type {kind!r}")


def sample_jitter(mode: str, n: int, T: float, seed: int = 0, density: dict | None = None) -> JitterSequence:
    if T < 0:
        raise ValueError("T must be >= 0")
    if mode not in JITTER_MODES:
        raise ValueError(f"unknown jitter mode {mode!r}")
    if mode == "none":
        vals = np.zeros(n)
    elif mode == "weyl_sqrt2":
        k = np.arange(1, n + 1, dtype=float)
        vals = T * np.mod(SQRT2 * k, 1.0)
    else:
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0x6A17]))
        u = rng.random(n)
        if mode == "general_density":
            if density is None:
                raise ValueError("general_density mode needs a density descriptor")
            vals = T * np.clip(_density_sampler(density)(u), 0.0, 1.0)
        else:
            vals = T * u
    return JitterSequence(mode, vals, T)


def _simpson(values: np.ndarray, h: float) -> np.ndarray:
    """Composite Simpson over axis 0 (odd number of samples)."""
    w = np.ones(values.shape[0])
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return h / 3.0 * np.tensordot(w, values, axes=(0, 0))


def _grid(length: float, I: float) -> tuple[np.ndarray, float]:
    n = max(2, int(math.ceil(length / (I / QUAD_STEPS_PER_INTERVAL))))
    n += n % 2
    return np.linspace(0.0, length, n + 1), length / n


def process_noise_cov(cspec: ContinuousSpec, dt: float) -> np.ndarray:
    """``int_0^dt e^{A s} B B^H e^{A^H s} ds`` by Simpson on a step of about I/512."""
    s, h = _grid(dt, cspec.I)
    E = jordan_expm_stack(cspec.blocks, s) @ cspec.B
    return _simpson(E @ np.swapaxes(E.conj(), -1, -2), h)


def observation_noise_cov(cspec: ContinuousSpec, window: float) -> np.ndarray:
    """Variance of the integrated output noise over one window.

    Process noise entering inside the window reaches the integral through
    ``G(u) = C_c int_{-u}^0 e^{A s} ds``; measurement noise adds ``window * D D^H``.
    """
    u, h = _grid(window, cspec.I)
    G = cspec.C @ integrate_expm_stack(cspec.blocks, -u, np.zeros_like(u)) @ cspec.B
    return _simpson(G @ np.swapaxes(G.conj(), -1, -2), h) + window * cspec.D @ cspec.D.conj().T


@dataclass
class DiscretizedModel:
    model: TimeVaryingModel
    jitter: JitterSequence
    flags: dict = field(default_factory=dict)


def discretize_nonuniform(cspec: ContinuousSpec, jitter: JitterSequence, horizon: int) -> DiscretizedModel:
    """Time-varying discrete model seen at the (jittered) sample instants.

    Needs ``horizon + 1`` jitter values since step n propagates from sample n
    to sample n + 1. Noise cross-correlations are dropped (see ``flags``).
    """
    vals = jitter.values
    if vals.size < horizon + 1:
        raise ValueError(f"need {horizon + 1} jitter values, got {vals.size}")
    vals = vals[:horizon + 1]
    I = cspec.I
    flags = {"noise_cross_correlation_ignored": True, "mode": jitter.mode}
    if jitter.mode == "interval_variant":
        A = jordan_expm(cspec.blocks, I)[None]
        windows = I + vals[:horizon]
        C = cspec.C @ integrate_expm_stack(cspec.blocks, -windows, np.zeros_like(windows))
        W = process_noise_cov(cspec, I)[None]
        R = np.stack([observation_noise_cov(cspec, w) for w in windows])
        return DiscretizedModel(TimeVaryingModel(A, C, W, R, np.eye(cspec.m)), jitter, flags)

    tau = (np.arange(horizon + 1) + 1) * I - vals
    dt = np.diff(tau)
    bad = np.flatnonzero(dt <= 0)
    if bad.size:
        raise ValueError(f"sample instants not increasing at step(s) {bad[:10].tolist()}")
    Cbar = integrated_C(cspec)[None]
    R = observation_noise_cov(cspec, I)[None]
    if np.all(dt == dt[0]):
        A = jordan_expm(cspec.blocks, float(dt[0]))[None]
        W = process_noise_cov(cspec, float(dt[0]))[None]
    else:
        A = jordan_expm_stack(cspec.blocks, dt)
        W = np.stack([process_noise_cov(cspec, float(d)) for d in dt])
    return DiscretizedModel(TimeVaryingModel(A, Cbar, W, R, np.eye(cspec.m)), jitter, flags)


def _jordan_chain(M: np.ndarray, mu: complex) -> np.ndarray:
    """P with P^-1 M P a single Jordan block, for M upper triangular Toeplitz with nonzero superdiagonal."""
    k = M.shape[0]
    N = M - mu * np.eye(k)
    cols = [np.eye(k)[:, -1]]
    for _ in range(k - 1):
        cols.append(N @ cols[-1])
    return np.column_stack(cols[::-1])


def _psd_sqrt(M: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (M + M.conj().T))
    return V * np.sqrt(np.clip(w, 0.0, None))


def uniform_sampled_spec(cspec: ContinuousSpec, config: AnalysisConfig | None = None) -> SystemSpec:
    """Zero-jitter sampled plant, re-expressed in Jordan form with exact phases where possible."""
    cfg = config or AnalysisConfig()
    I = cspec.I
    E = jordan_expm(cspec.blocks, I)
    P = np.zeros_like(E)
    blocks = []
    for off, b in zip(block_offsets(cspec.blocks), cspec.blocks):
        sl = slice(off, off + b.size)
        mu = np.exp(b.lam * I)
        P[sl, sl] = _jordan_chain(E[sl, sl], mu)
        phase = approximate_rational_phase(b.im * I, cfg.max_den, cfg.phase_tol)
        blocks.append(JordanBlock(Eigenvalue(math.exp(b.re * I), phase), b.size))
    Pinv = np.linalg.inv(P)
    C = integrated_C(cspec) @ P
    B = Pinv @ _psd_sqrt(process_noise_cov(cspec, I))
    return SystemSpec(tuple(blocks), B, C)


def _pbh_unobservable(A: np.ndarray, C: np.ndarray, lams, rel_tol: float) -> list[complex]:
    m = A.shape[0]
    out = []
    for lam in lams:
        if rank_with_tolerance(np.vstack([A - lam * np.eye(m), C]), rel_tol) < m:
            out.append(lam)
    return out


def continuous_critical(cspec: ContinuousSpec, rel_tol: float = 1e-9) -> dict:
    """Critical erasure probability of the jittered sampler, ``exp(-2 Re(lam_max) I)``."""
    lams = sorted({b.lam for b in cspec.blocks}, key=lambda z: (-z.real, z.imag))
    C = cspec.C if cspec.jitter_mode == "interval_variant" else integrated_C(cspec)
    hidden = _pbh_unobservable(cspec.A, C, lams, rel_tol)
    if any(z.real >= 0 for z in hidden):
        return {"critical": 0.0, "unobservable_unstable": True,
                "unobservable": [[z.real, z.imag] for z in hidden]}
    re_max = lams[0].real
    crit = 1.0 if re_max <= 0 else math.exp(-2.0 * re_max * cspec.I)
    return {"critical": min(1.0, crit), "unobservable_unstable": False,
            "unobservable": [[z.real, z.imag] for z in hidden]}


def apply_time_varying_filter(y, alpha, alpha_prime) -> np.ndarray:
    """``y'[n] = alpha[n] y[n] + alpha'[n] y[n-1]`` with ``y[-1] = 0``."""
    y = np.asarray(y)
    if y.ndim == 1:
        y = y[:, None]
    alpha = np.asarray(alpha)
    alpha_prime = np.asarray(alpha_prime)
    if alpha.shape != (y.shape[0],) or alpha_prime.shape != (y.shape[0],):
        raise ValueError("alpha and alpha_prime must have one entry per sample")
    prev = np.vstack([np.zeros((1, y.shape[1]), dtype=y.dtype), y[:-1]])
    return alpha[:, None] * y + alpha_prime[:, None] * prev


def filtered_model(spec: SystemSpec, alpha, alpha_prime, Q=None, R=None) -> TimeVaryingModel:
    """Discrete model seen by a filter fed with ``apply_time_varying_filter`` outputs.

    Uses ``y[n-1] = C A^-1 x[n] - C A^-1 B w[n-1] + v[n-1]`` which gives
    ``C_n = alpha C + alpha' C A^-1`` and a per-step noise covariance; the
    correlation of that noise with ``w[n-1]`` and with the next output is dropped.
    """
    alpha = np.asarray(alpha, dtype=float)
    alpha_prime = np.asarray(alpha_prime, dtype=float)
    if alpha.shape != alpha_prime.shape or alpha.ndim != 1:
        raise ValueError("alpha and alpha_prime must be 1-D of equal length")
    A, B, C = spec.A, spec.B, spec.C
    Q = np.eye(B.shape[1]) if Q is None else as_complex_matrix(Q, "Q")
    R = np.eye(C.shape[0]) if R is None else as_complex_matrix(R, "R")
    CAi = C @ np.linalg.inv(A)
    ap = alpha_prime.copy()
    ap[0] = 0.0  # y[-1] = 0
    Cn = alpha[:, None, None] * C + ap[:, None, None] * CAi
    extra = CAi @ B @ Q @ B.conj().T @ CAi.conj().T
    Rn = (alpha**2 + ap**2)[:, None, None] * R + (ap**2)[:, None, None] * extra
    return TimeVaryingModel(A, Cn, B @ Q @ B.conj().T, Rn, np.eye(spec.m))


def uniform_vs_nonuniform_report(cspec: ContinuousSpec, grid: Sequence[float],
                                 cfg: SimConfig | None = None, mode: str | None = None,
                                 analysis: AnalysisConfig | None = None) -> dict:
    """Sweep the zero-jitter and the jittered discretizations side by side."""
    from .spectral import critical_erasure

    cfg = cfg or SimConfig()
    mode = mode or (cspec.jitter_mode if cspec.jitter_mode != "none" else "weyl_sqrt2")
    jittered = cspec.with_mode(mode)
    n = cfg.horizon + 1
    uni = discretize_nonuniform(cspec, sample_jitter("none", n, cspec.T), cfg.horizon)
    jit_seq = sample_jitter(mode, n, cspec.T, cfg.seed, cspec.jitter_density)
    non = discretize_nonuniform(cspec, jit_seq, cfg.horizon)
    uni_sweep = sweep_threshold(uni.model, grid, cfg)
    non_sweep = sweep_threshold(non.model, grid, cfg)
    analytic_uniform = critical_erasure(uniform_sampled_spec(cspec, analysis), config=analysis)
    analytic_non = continuous_critical(jittered) if mode != "none" else {
        "critical": analytic_uniform.critical, "unobservable_unstable": analytic_uniform.flags["unobservable_unstable"]}

    def rows(sw):
        return [{"p_e": p, "verdict": c.verdict, "slope": c.growth_exponent}
                for p, c in zip(sw.p_e, sw.classifications)]

    return {
        "jitter_mode": mode,
        "analytic": {"uniform": analytic_uniform.critical, "nonuniform": analytic_non["critical"]},
        "uniform": {"interval": list(uni_sweep.interval), "monotone": uni_sweep.monotone,
                    "diagnostic": uni_sweep.diagnostic, "points": rows(uni_sweep)},
        "nonuniform": {"interval": list(non_sweep.interval), "monotone": non_sweep.monotone,
                       "diagnostic": non_sweep.diagnostic, "points": rows(non_sweep)},
        "flags": {"noise_cross_correlation_ignored": True},
    }

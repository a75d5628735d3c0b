"""Eigenvalue cycles, erasure budgets and critical erasure probabilities.

A cycle is a maximal group of eigenvalues of equal magnitude whose pairwise
ratios are roots of unity. For each cycle the erasure budget ``l`` is the
smallest number of slots out of one period whose removal leaves a rank
deficient observability Gramian; the critical erasure probability is then
``min_i |lambda_i|**(-2 p_i / l_i)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from .config import AnalysisConfig
from .model import (
    Eigenvalue,
    Irrational,
    JordanBlock,
    SystemSpec,
    as_complex_matrix,
    batched_ranks,
    block_offsets,
    matrix_from_jordan,
    rank_with_tolerance,
    same_eigenvalue,
    unit_root,
)

_CHUNK = 4096


class EnumerationCapError(RuntimeError):
    """The exact combinatorial search would exceed its configured budget."""


@dataclass(frozen=True)
class EigenvalueCycle:
    # one entry per Jordan block in the cycle, in cycle order
    block_indices: tuple[int, ...]
    eigenvalues: tuple[Eigenvalue, ...]
    # exact phase of each block relative to the first one, in turns
    relative_turns: tuple[Fraction, ...]
    period: int
    l: int | None = None

    @property
    def nu(self) -> int:
        return len(self.block_indices)

    @property
    def magnitude(self) -> float:
        return self.eigenvalues[0].magnitude

    @property
    def members(self) -> list[tuple[Eigenvalue, tuple[int, ...]]]:
        """Distinct eigenvalues of the cycle with the blocks carrying them."""
        out: list[tuple[Eigenvalue, list[int]]] = []
        for eig, idx in zip(self.eigenvalues, self.block_indices):
            for e, blocks in out:
                if e.phase == eig.phase:
                    blocks.append(idx)
                    break
            else:
                out.append((eig, [idx]))
        return [(e, tuple(b)) for e, b in out]

    def with_l(self, l: int) -> "EigenvalueCycle":
        return replace(self, l=l)


def _relative_turns(a: Eigenvalue, b: Eigenvalue) -> Fraction | None:
    """Exact (b.phase - a.phase) in turns if rational, else None."""
    pa, pb = a.phase, b.phase
    if isinstance(pa, Fraction) and isinstance(pb, Fraction):
        return (pb - pa) % 1
    if isinstance(pa, Irrational) and isinstance(pb, Irrational) and pa.theta == pb.theta:
        return (pb.offset - pa.offset) % 1
    return None


def _lcm(values) -> int:
    out = 1
    for v in values:
        out = out * v // math.gcd(out, v)
    return out


def partition_cycles(spec_or_blocks, mag_rel_tol: float = 1e-9) -> list[EigenvalueCycle]:
    """Split the Jordan blocks into maximal eigenvalue cycles.

    Sorted by magnitude (descending), then period, then first block index.
    """
    blocks = spec_or_blocks.blocks if isinstance(spec_or_blocks, SystemSpec) else tuple(spec_or_blocks)
    groups: list[list[int]] = []
    for idx, b in enumerate(blocks):
        for g in groups:
            ref = blocks[g[0]].eig
            same_mag = abs(ref.magnitude - b.eig.magnitude) <= mag_rel_tol * max(ref.magnitude, b.eig.magnitude)
            if same_mag and _relative_turns(ref, b.eig) is not None:
                g.append(idx)
                break
        else:
            groups.append([idx])

    cycles = []
    for g in groups:
        ref = blocks[g[0]].eig
        rel = tuple(_relative_turns(ref, blocks[i].eig) for i in g)
        cycles.append(EigenvalueCycle(
            block_indices=tuple(g),
            eigenvalues=tuple(blocks[i].eig for i in g),
            relative_turns=rel,
            period=_lcm(r.denominator for r in rel),
        ))
    cycles.sort(key=lambda c: (-c.magnitude, c.period, c.block_indices[0]))
    return cycles


def restrict_C(spec_or_blocks, C, cycle: EigenvalueCycle) -> np.ndarray:
    """Columns of C at the first state of each of the cycle's blocks."""
    blocks = spec_or_blocks.blocks if isinstance(spec_or_blocks, SystemSpec) else tuple(spec_or_blocks)
    offsets = block_offsets(blocks)
    C = np.asarray(C, dtype=complex)
    return C[:, [offsets[i] for i in cycle.block_indices]]


def gramian_rows(cycle: EigenvalueCycle, C_i, normalize: bool = True) -> np.ndarray:
    """Per-slot blocks ``C_i @ A_i**s`` for s in 0..p-1, shape (p, rows, nu).

    With ``normalize`` each slot is divided by the common factor
    ``(|lambda| e^{j theta_1})**s`` which leaves ranks unchanged and keeps
    entries O(1); the remaining phases are evaluated from exact fractions.
    """
    C_i = as_complex_matrix(C_i, "C_i")
    if C_i.shape[1] != cycle.nu:
        raise ValueError(f"C_i has {C_i.shape[1]} columns, cycle has {cycle.nu} blocks")
    p = cycle.period
    out = np.empty((p, C_i.shape[0], cycle.nu), dtype=complex)
    for s in range(p):
        phases = np.array([unit_root(r * s) for r in cycle.relative_turns])
        out[s] = C_i * phases[None, :]
    if not normalize:
        lam0 = cycle.eigenvalues[0].value
        out *= (lam0 ** np.arange(p))[:, None, None]
    return out


def _l_by_enumeration(rows: np.ndarray, nu: int, rel_tol: float) -> int:
    """Erased sets in order of cardinality, exit at the first rank-deficient survivor set."""
    p, n_out = rows.shape[0], rows.shape[1]
    slots = np.arange(p)
    for k in range(p + 1):
        n_surv = p - k
        if n_surv * n_out < nu:
            return k
        combos = itertools.combinations(range(p), k)
        while True:
            chunk = list(itertools.islice(combos, _CHUNK))
            if not chunk:
                break
            keep = np.ones((len(chunk), p), dtype=bool)
            if k:
                keep[np.arange(len(chunk))[:, None], np.array(chunk)] = False
            surv = np.broadcast_to(slots, keep.shape)[keep].reshape(len(chunk), n_surv)
            stack = rows[surv].reshape(len(chunk), n_surv * n_out, nu)
            if np.any(batched_ranks(stack, n_surv * n_out, rel_tol) < nu):
                return k
    return p


def _l_by_closure(rows: np.ndarray, nu: int, rel_tol: float) -> int:
    """p minus the largest rank-deficient survivor set, found through span closures.

    Deficient survivor sets are closed under subsets, and a maximal one equals
    the closure (all slots whose rows lie in the span) of a basis of at most
    nu - 1 slots. Enumerating those bases costs sum_{k<nu} C(p, k) rank tests
    instead of up to 2**p.
    """
    p, n_out = rows.shape[0], rows.shape[1]
    zero_slots = int(np.count_nonzero(batched_ranks(rows, n_out, rel_tol) == 0))
    best = zero_slots  # closure of the empty basis
    for k in range(1, min(nu - 1, p) + 1):
        combos = itertools.combinations(range(p), k)
        while best < p:
            chunk = list(itertools.islice(combos, _CHUNK))
            if not chunk:
                break
            idx = np.array(chunk)
            base = rows[idx].reshape(len(chunk), k * n_out, nu)
            r_base = batched_ranks(base, k * n_out, rel_tol)
            ok = np.flatnonzero(r_base < nu)
            if ok.size == 0:
                continue
            base = base[ok]
            # append every slot to every candidate basis
            ext = np.concatenate([np.repeat(base[:, None], p, axis=1),
                                  np.broadcast_to(rows[None], (ok.size,) + rows.shape)], axis=2)
            r_ext = batched_ranks(ext.reshape(ok.size * p, (k + 1) * n_out, nu), (k + 1) * n_out, rel_tol)
            closure = np.count_nonzero(r_ext.reshape(ok.size, p) == r_base[ok, None], axis=1)
            best = max(best, int(closure.max()))
    return p - best


def compute_l(cycle: EigenvalueCycle, C_i, rel_tol: float = 1e-9, max_period: int = 24,
              normalize: bool = True, method: str = "closure") -> int:
    """Smallest number of erased slots (out of one period) that kill the Gramian rank.

    ``method="enumerate"`` walks erased sets by cardinality; ``"closure"``
    (default) searches maximal deficient survivor sets and is exact as well.
    """
    p, nu = cycle.period, cycle.nu
    if p > max_period:
        raise EnumerationCapError(
            f"cycle period {p} exceeds the enumeration cap max_period={max_period}")
    rows = gramian_rows(cycle, C_i, normalize=normalize)
    if method == "closure":
        return _l_by_closure(rows, nu, rel_tol)
    if method == "enumerate":
        return _l_by_enumeration(rows, nu, rel_tol)
    raise ValueError(f"unknown method {method!r}")


def cycle_log_threshold(magnitude: float, period: int, l: int) -> float:
    """log of ``|lambda|**(-2p/l)`` with the 0/0 = 1, 1/0 = inf conventions."""
    log_mag = math.log(magnitude)
    if l == 0:
        return -math.inf if log_mag >= 0 else math.inf
    return -2.0 * (period / l) * log_mag


def cycle_threshold(magnitude: float, period: int, l: int) -> float:
    """``|lambda|**(-2p/l)`` clamped to [0, 1]."""
    if l == 0:
        return 0.0 if magnitude >= 1 else 1.0
    if magnitude <= 1:
        return 1.0
    return magnitude ** (-2.0 * period / l)


@dataclass
class CriticalReport:
    cycles: list[EigenvalueCycle]
    per_cycle_threshold: list[float]
    critical: float
    bottleneck_cycle: int
    flags: dict = field(default_factory=dict)

    @property
    def bottleneck(self) -> EigenvalueCycle:
        return self.cycles[self.bottleneck_cycle]

    def to_dict(self) -> dict:
        cycles = []
        for c, thr in zip(self.cycles, self.per_cycle_threshold):
            cycles.append({
                "blocks": list(c.block_indices),
                "eigenvalues": [str(e) for e in c.eigenvalues],
                "magnitude": c.magnitude,
                "nu": c.nu,
                "period": c.period,
                "l": c.l,
                "threshold": thr,
                "log_threshold": cycle_log_threshold(c.magnitude, c.period, c.l),
            })
        return {"critical": self.critical, "bottleneck_cycle": self.bottleneck_cycle,
                "cycles": cycles, "flags": dict(self.flags)}


def critical_erasure(spec: SystemSpec, rel_tol: float | None = None,
                     config: AnalysisConfig | None = None) -> CriticalReport:
    """Exact critical erasure probability of a Jordan-form plant.

    The plant is intermittently observable iff ``p_e < report.critical``.
    """
    cfg = config or AnalysisConfig()
    tol = cfg.rel_tol if rel_tol is None else rel_tol
    cycles = []
    for c in partition_cycles(spec, cfg.mag_rel_tol):
        C_i = restrict_C(spec, spec.C, c)
        cycles.append(c.with_l(compute_l(c, C_i, tol, cfg.max_period)))
    logs = [cycle_log_threshold(c.magnitude, c.period, c.l) for c in cycles]
    thresholds = [cycle_threshold(c.magnitude, c.period, c.l) for c in cycles]
    bottleneck = int(np.argmin(logs))  # first minimum keeps the documented cycle order
    critical = min(1.0, max(0.0, thresholds[bottleneck]))
    flags = {
        "unobservable_unstable": any(c.l == 0 and c.magnitude >= 1 for c in cycles),
        "all_stable": all(c.magnitude < 1 for c in cycles),
    }
    if flags["unobservable_unstable"]:
        critical = 0.0
    return CriticalReport(cycles, thresholds, critical, bottleneck, flags)


def critical_no_cycle_fastpath(spec: SystemSpec, mag_rel_tol: float = 1e-9) -> float | None:
    """``1/|lambda_max|**2`` when every cycle has period 1, else None.

    Assumes (A, C) observable.
    """
    cycles = partition_cycles(spec, mag_rel_tol)
    if any(c.period != 1 for c in cycles):
        return None
    lam_max = max(c.magnitude for c in cycles)
    return 1.0 if lam_max <= 1 else lam_max ** -2.0


def bound_sandwich(spec: SystemSpec) -> tuple[float, float]:
    """Classical bounds ``1/prod|lambda_unstable|**2 <= p* <= 1/|lambda_max|**2``.

    Eigenvalues are counted with algebraic multiplicity; both ends clamped to 1.
    """
    prod = math.prod(b.eig.magnitude ** (2 * b.size) for b in spec.blocks if b.eig.magnitude >= 1)
    lam_max = max(b.eig.magnitude for b in spec.blocks)
    lower = min(1.0, 1.0 / prod)  # 1/inf -> 0.0 for astronomically unstable plants
    upper = 1.0 if lam_max <= 1 else lam_max ** -2.0
    return lower, upper


@dataclass(frozen=True)
class ParallelSpec:
    """Plant observed through ``d`` independent erasure channels."""

    blocks: tuple[JordanBlock, ...]
    B: np.ndarray
    channels: tuple[np.ndarray, ...]
    erasure_probs: tuple[float, ...]
    sigma: float = 1.0
    sigma_prime: float = 1.0

    def __post_init__(self):
        blocks = tuple(self.blocks)
        m = sum(b.size for b in blocks)
        chans = tuple(as_complex_matrix(C, f"C_{j + 1}") for j, C in enumerate(self.channels))
        if not chans:
            raise ValueError("at least one channel is required")
        for j, C in enumerate(chans):
            if C.shape[1] != m:
                raise ValueError(f"channel {j + 1} has {C.shape[1]} columns, expected {m}")
        probs = tuple(float(p) for p in self.erasure_probs)
        if len(probs) != len(chans):
            raise ValueError("one erasure probability per channel is required")
        if any(not 0 <= p <= 1 for p in probs):
            raise ValueError("erasure probabilities must lie in [0, 1]")
        # reuse SystemSpec validation for blocks, B and noise bounds
        SystemSpec(blocks, self.B, np.vstack(chans), self.sigma, self.sigma_prime)
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "B", as_complex_matrix(self.B, "B"))
        object.__setattr__(self, "channels", chans)
        object.__setattr__(self, "erasure_probs", probs)

    @property
    def A(self) -> np.ndarray:
        return matrix_from_jordan(self.blocks)

    @property
    def d(self) -> int:
        return len(self.channels)

    def __eq__(self, other):
        if not isinstance(other, ParallelSpec):
            return NotImplemented
        return (self.blocks == other.blocks and np.array_equal(self.B, other.B)
                and len(self.channels) == len(other.channels)
                and all(np.array_equal(a, b) for a, b in zip(self.channels, other.channels))
                and self.erasure_probs == other.erasure_probs
                and self.sigma == other.sigma and self.sigma_prime == other.sigma_prime)

    __hash__ = None


def _minimal_vectors(vectors) -> list[tuple[int, ...]]:
    vecs = sorted(set(vectors), key=lambda v: (sum(v), v))
    minimal: list[tuple[int, ...]] = []
    for v in vecs:
        if not any(all(a <= b for a, b in zip(u, v)) for u in minimal):
            minimal.append(v)
    return minimal


def deficient_cardinality_vectors(cycle: EigenvalueCycle, channel_rows: Sequence[np.ndarray],
                                  rel_tol: float = 1e-9, budget: int = 2**20) -> list[tuple[int, ...]]:
    """Minimal per-channel erasure counts that make the stacked Gramian rank deficient.

    ``channel_rows[j]`` is the restricted C of channel j (rows x nu). All
    survivor patterns over (slot, channel) pairs are enumerated.
    """
    p, nu, d = cycle.period, cycle.nu, len(channel_rows)
    n_bits = p * d
    if 2**n_bits > budget:
        raise EnumerationCapError(
            f"parallel enumeration for (p={p}, d={d}) needs 2**{n_bits} patterns, budget is {budget}")
    grams = [gramian_rows(cycle, Cj) for Cj in channel_rows]
    # one row-block per (channel, slot); bit index = j * p + s
    blocks = []
    owners = []
    for j, g in enumerate(grams):
        for s in range(p):
            blocks.append(g[s])
            owners.append(j)
    sizes = np.array([b.shape[0] for b in blocks])
    full = np.concatenate(blocks, axis=0)
    row_owner = np.repeat(np.arange(n_bits), sizes)
    owners = np.array(owners)

    found = []
    total = 2**n_bits
    for start in range(0, total, _CHUNK):
        masks = np.arange(start, min(total, start + _CHUNK), dtype=np.int64)
        alive = ((masks[:, None] >> np.arange(n_bits)[None, :]) & 1).astype(bool)
        row_alive = alive[:, row_owner]
        stack = full[None, :, :] * row_alive[:, :, None]
        n_rows = row_alive.sum(axis=1)
        deficient = batched_ranks(stack, n_rows, rel_tol) < nu
        for a in alive[deficient]:
            erased = ~a
            found.append(tuple(int(np.count_nonzero(erased[owners == j])) for j in range(d)))
    return _minimal_vectors(found)


@dataclass
class ParallelMargin:
    stable: bool
    margin: float
    binding: tuple[int, tuple[int, ...]] | None
    value: float
    vectors: list[list[tuple[int, ...]]]

    def to_dict(self) -> dict:
        return {"stable": self.stable, "margin": self.margin, "value": self.value,
                "binding": None if self.binding is None else
                {"cycle": self.binding[0], "cardinality": list(self.binding[1])},
                "minimal_vectors": [[list(v) for v in vs] for vs in self.vectors]}


def parallel_stability_margin(pspec: ParallelSpec, rel_tol: float | None = None,
                              config: AnalysisConfig | None = None) -> ParallelMargin:
    """Stability test for parallel erasure channels.

    Evaluates ``max_i max_{L in L_i} prod_j p_j**(L_j/p_i) * |lambda_i|**2``
    over minimal rank-killing cardinality vectors; stable iff below 1.
    """
    cfg = config or AnalysisConfig()
    tol = cfg.rel_tol if rel_tol is None else rel_tol
    cycles = partition_cycles(pspec.blocks, cfg.mag_rel_tol)
    probs = pspec.erasure_probs
    best, binding, all_vecs = -math.inf, None, []
    for ci, c in enumerate(cycles):
        rows = [restrict_C(pspec.blocks, Cj, c) for Cj in pspec.channels]
        vecs = deficient_cardinality_vectors(c, rows, tol, cfg.parallel_budget)
        all_vecs.append(vecs)
        for v in vecs:
            log_val = 2.0 * math.log(c.magnitude)
            for pj, lj in zip(probs, v):
                if lj == 0:
                    continue
                log_val += -math.inf if pj == 0 else (lj / c.period) * math.log(pj)
            if log_val > best:
                best, binding = log_val, (ci, v)
    value = math.exp(best) if best > -math.inf else 0.0
    return ParallelMargin(stable=value < 1, margin=1.0 - value, binding=binding,
                          value=value, vectors=all_vecs)

"""Exact eigenvalue representation, Jordan-form plants and rank utilities.

Phases are kept as exact fractions of a full turn whenever possible so that
root-of-unity questions (``(a/b)**n == 1``) are answered without floating
point comparisons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Irrational:
    """A phase not known to be a rational multiple of 2*pi.

    ``theta`` is a base angle in radians and ``offset`` an exact rational
    number of turns added to it. Two irrational phases are rationally related
    only when they share the same base, so ``Irrational(w, 0)`` and
    ``Irrational(w, Fraction(1, 6))`` form a period-6 pair while different
    bases never do.
    """

    theta: float
    offset: Fraction = Fraction(0)

    def __post_init__(self):
        if not math.isfinite(self.theta):
            raise ValueError("irrational phase must be finite")
        object.__setattr__(self, "theta", math.fmod(self.theta, TWO_PI) % TWO_PI)
        object.__setattr__(self, "offset", Fraction(self.offset) % 1)

    @property
    def radians(self) -> float:
        return (self.theta + TWO_PI * float(self.offset)) % TWO_PI


Phase = Union[Fraction, Irrational]


def _normalize_phase(phase) -> Phase:
    if isinstance(phase, Irrational):
        return phase
    if isinstance(phase, (int, Fraction)):
        return Fraction(phase) % 1
    if isinstance(phase, tuple) and len(phase) == 2:
        num, den = phase
        if den < 1:
            raise ValueError(f"phase denominator must be >= 1, got {den}")
        return Fraction(num, den) % 1
    raise TypeError(f"unsupported phase {phase!r}; use Fraction turns or Irrational")


@dataclass(frozen=True)
class Eigenvalue:
    """``magnitude * exp(2j*pi*phase)`` with ``phase`` in turns when rational."""

    magnitude: float
    phase: Phase = Fraction(0)

    def __post_init__(self):
        mag = float(self.magnitude)
        if not math.isfinite(mag) or mag < 0:
            raise ValueError(f"eigenvalue magnitude must be finite and >= 0, got {mag}")
        object.__setattr__(self, "magnitude", mag)
        object.__setattr__(self, "phase", _normalize_phase(self.phase))

    @property
    def is_rational(self) -> bool:
        return isinstance(self.phase, Fraction)

    @property
    def angle(self) -> float:
        if isinstance(self.phase, Fraction):
            return TWO_PI * float(self.phase)
        return self.phase.radians

    @property
    def value(self) -> complex:
        if isinstance(self.phase, Fraction):
            return self.magnitude * unit_root(self.phase)
        return self.magnitude * complex(math.cos(self.angle), math.sin(self.angle))

    @classmethod
    def from_complex(cls, z: complex, max_den: int = 64, tol: float = 1e-9) -> "Eigenvalue":
        z = complex(z)
        return cls(abs(z), approximate_rational_phase(math.atan2(z.imag, z.real), max_den, tol))

    def __str__(self) -> str:
        if isinstance(self.phase, Fraction):
            if self.phase == 0:
                return f"{self.magnitude:g}"
            return f"{self.magnitude:g}*e^(2pi*j*{self.phase})"
        return f"{self.magnitude:g}*e^(j*{self.angle:.6g})"


def unit_root(turns: Fraction) -> complex:
    """exp(2j*pi*turns) evaluated on the reduced fraction (exact at quarter turns)."""
    t = Fraction(turns) % 1
    if 4 % t.denominator == 0:
        return (1 + 0j, 1j, -1 + 0j, -1j)[int(t * 4)]
    a = TWO_PI * float(t)
    return complex(math.cos(a), math.sin(a))


@dataclass(frozen=True)
class JordanBlock:
    eig: Eigenvalue
    size: int = 1

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 1:
            raise ValueError(f"Jordan block size must be a positive integer, got {self.size}")
        object.__setattr__(self, "size", int(self.size))


def as_complex_matrix(M, name: str = "matrix") -> np.ndarray:
    arr = np.array(M, dtype=complex)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


def block_offsets(blocks: Sequence[JordanBlock]) -> list[int]:
    """Row/column index of the first state of every block."""
    offsets, pos = [], 0
    for b in blocks:
        offsets.append(pos)
        pos += b.size
    return offsets


@dataclass(frozen=True)
class SystemSpec:
    """Discrete plant ``x+ = A x + B w``, ``y = beta (C x + v)`` with A in Jordan form."""

    blocks: tuple[JordanBlock, ...]
    B: np.ndarray
    C: np.ndarray
    sigma: float = 1.0
    sigma_prime: float = 1.0
    A: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        blocks = tuple(self.blocks)
        if not blocks:
            raise ValueError("system needs at least one Jordan block")
        for b in blocks:
            if b.eig.magnitude == 0:
                raise ValueError("zero eigenvalues are not supported (A must be invertible)")
        object.__setattr__(self, "blocks", blocks)
        m = sum(b.size for b in blocks)
        B = as_complex_matrix(self.B, "B")
        C = as_complex_matrix(self.C, "C")
        if B.shape[0] != m:
            raise ValueError(f"B has {B.shape[0]} rows, expected {m}")
        if C.shape[1] != m:
            raise ValueError(f"C has {C.shape[1]} columns, expected {m}")
        if not (self.sigma_prime > 0):
            raise ValueError("sigma_prime must be strictly positive")
        if self.sigma_prime > self.sigma:
            raise ValueError("sigma_prime must not exceed sigma")
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "A", matrix_from_jordan(blocks))

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def eigenvalues(self) -> list[Eigenvalue]:
        return [b.eig for b in self.blocks]

    def with_C(self, C) -> "SystemSpec":
        return SystemSpec(self.blocks, self.B, C, self.sigma, self.sigma_prime)

    def __eq__(self, other):
        if not isinstance(other, SystemSpec):
            return NotImplemented
        return (self.blocks == other.blocks and np.array_equal(self.B, other.B)
                and np.array_equal(self.C, other.C) and self.sigma == other.sigma
                and self.sigma_prime == other.sigma_prime)

    __hash__ = None


def diagonal_spec(eigs: Sequence, C, B=None, **kw) -> SystemSpec:
    """Convenience constructor for diagonal plants; eigs may be Eigenvalue or complex."""
    blocks = tuple(JordanBlock(e if isinstance(e, Eigenvalue) else Eigenvalue.from_complex(e))
                   for e in eigs)
    m = len(blocks)
    return SystemSpec(blocks, np.eye(m) if B is None else B, C, **kw)


def matrix_from_jordan(blocks: Sequence[JordanBlock]) -> np.ndarray:
    m = sum(b.size for b in blocks)
    A = np.zeros((m, m), dtype=complex)
    for off, b in zip(block_offsets(blocks), blocks):
        lam = b.eig.value
        for i in range(b.size):
            A[off + i, off + i] = lam
            if i + 1 < b.size:
                A[off + i, off + i + 1] = 1.0
    A.setflags(write=False)
    return A


def rank_with_tolerance(M, rel_tol: float = 1e-9) -> int:
    """Singular values above ``rel_tol * max(shape) * sigma_max`` are counted."""
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    M = np.asarray(M, dtype=complex)
    if M.ndim == 1:
        M = M.reshape(1, -1)
    if M.size == 0:
        return 0
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.count_nonzero(s > rel_tol * max(M.shape) * s[0]))


def batched_ranks(stack: np.ndarray, n_rows, rel_tol: float = 1e-9) -> np.ndarray:
    """Ranks of a stack of (rows, cols) matrices under the same threshold rule.

    ``n_rows`` gives the number of meaningful rows per matrix (zero padding
    rows do not change singular values but must not inflate the threshold).
    """
    if stack.shape[0] == 0:
        return np.zeros(0, dtype=int)
    s = np.linalg.svd(stack, compute_uv=False)
    smax = s[:, :1]
    cols = stack.shape[2]
    thresh = rel_tol * np.maximum(np.asarray(n_rows).reshape(-1, 1), cols) * smax
    ranks = np.count_nonzero(s > thresh, axis=1)
    ranks[smax[:, 0] == 0] = 0
    return ranks


def same_eigenvalue(a: Eigenvalue, b: Eigenvalue, mag_rel_tol: float = 1e-9) -> bool:
    if a.phase != b.phase:
        return False
    return abs(a.magnitude - b.magnitude) <= mag_rel_tol * max(a.magnitude, b.magnitude)


def group_blocks(blocks: Sequence[JordanBlock], mag_rel_tol: float = 1e-9) -> list[tuple[Eigenvalue, list[int]]]:
    """Group block indices by (tolerance-equal) eigenvalue, in first-seen order."""
    groups: list[tuple[Eigenvalue, list[int]]] = []
    for idx, b in enumerate(blocks):
        for eig, members in groups:
            if same_eigenvalue(eig, b.eig, mag_rel_tol):
                members.append(idx)
                break
        else:
            groups.append((b.eig, [idx]))
    return groups


def observable_eigen_report(spec: SystemSpec, rel_tol: float = 1e-9,
                            mag_rel_tol: float = 1e-9) -> dict[Eigenvalue, dict]:
    """Per distinct eigenvalue, whether its states are observable from C.

    Uses the Jordan-form test: the columns of C sitting at the first state of
    each block of that eigenvalue must have rank equal to the block count.
    """
    offsets = block_offsets(spec.blocks)
    report = {}
    for eig, members in group_blocks(spec.blocks, mag_rel_tol):
        cols = spec.C[:, [offsets[i] for i in members]]
        report[eig] = {"observable": rank_with_tolerance(cols, rel_tol) == len(members),
                       "blocks": list(members)}
    return report


def is_observable(spec: SystemSpec, rel_tol: float = 1e-9) -> bool:
    return all(v["observable"] for v in observable_eigen_report(spec, rel_tol).values())


def approximate_rational_phase(theta: float, max_den: int = 64, tol: float = 1e-9) -> Phase:
    """Closest p/q (q <= max_den) to theta/2pi, or ``Irrational(theta)`` if none is within tol radians."""
    if max_den < 1:
        raise ValueError("max_den must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    turns = (theta / TWO_PI) % 1.0
    approx = Fraction(turns).limit_denominator(max_den)
    err = abs(turns - float(approx))
    if TWO_PI * err <= tol:
        return approx % 1
    return Irrational(theta)

import cmath
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from erasurekf.model import (
    Eigenvalue,
    Irrational,
    JordanBlock,
    SystemSpec,
    approximate_rational_phase,
    diagonal_spec,
    matrix_from_jordan,
    observable_eigen_report,
    rank_with_tolerance,
    unit_root,
)


def test_eigenvalue_phase_reduced():
    e = Eigenvalue(2.0, Fraction(18, 32))
    assert e.phase == Fraction(9, 16)
    assert Eigenvalue(1.0, Fraction(-1, 4)).phase == Fraction(3, 4)


def test_eigenvalue_rejects_negative_magnitude():
    with pytest.raises(ValueError):
        Eigenvalue(-1.0)


def test_unit_root_exact_quarters():
    assert unit_root(Fraction(1, 2)) == -1
    assert unit_root(Fraction(1, 4)) == 1j
    assert unit_root(Fraction(0)) == 1
    assert abs(unit_root(Fraction(1, 3)) - cmath.exp(2j * math.pi / 3)) < 1e-15


def test_matrix_from_jordan_examples():
    half = Fraction(1, 2)
    A = matrix_from_jordan([JordanBlock(Eigenvalue(2)), JordanBlock(Eigenvalue(2, half))])
    assert np.array_equal(A, np.diag([2, -2]))
    A = matrix_from_jordan([JordanBlock(Eigenvalue(2), 2)])
    assert np.array_equal(A, [[2, 1], [0, 2]])
    A = matrix_from_jordan([JordanBlock(Eigenvalue(3)), JordanBlock(Eigenvalue(2)),
                            JordanBlock(Eigenvalue(2, half))])
    assert np.array_equal(A, np.diag([3, 2, -2]))


def test_jordan_block_size_validated():
    with pytest.raises(ValueError):
        JordanBlock(Eigenvalue(2), 0)


def test_system_spec_validation():
    blocks = (JordanBlock(Eigenvalue(2)),)
    with pytest.raises(ValueError, match="sigma_prime"):
        SystemSpec(blocks, [[1]], [[1]], sigma=1.0, sigma_prime=0.0)
    with pytest.raises(ValueError, match="exceed"):
        SystemSpec(blocks, [[1]], [[1]], sigma=1.0, sigma_prime=2.0)
    with pytest.raises(ValueError, match="columns"):
        SystemSpec(blocks, [[1]], [[1, 1]])
    with pytest.raises(ValueError, match="zero eigenvalues"):
        SystemSpec((JordanBlock(Eigenvalue(0)),), [[1]], [[1]])
    with pytest.raises(ValueError, match="non-finite"):
        SystemSpec(blocks, [[1]], [[np.nan]])


def test_rank_examples():
    assert rank_with_tolerance(np.eye(3), 1e-10) == 3
    assert rank_with_tolerance([[1, 1], [1, 1]], 1e-10) == 1
    V = np.array([[cmath.exp(2j * math.pi * a * b / 5) for b in range(3)] for a in range(3)])
    assert rank_with_tolerance(V, 1e-9) == 3
    assert rank_with_tolerance(np.zeros((2, 3))) == 0
    with pytest.raises(ValueError):
        rank_with_tolerance([[np.inf]])
    with pytest.raises(ValueError):
        rank_with_tolerance(np.eye(2), 0.0)


def test_observable_report_repeated_eigenvalue():
    # eigenvalue 2 with blocks of size 2 and 1, eigenvalue 3 with one block
    blocks = (JordanBlock(Eigenvalue(2), 2), JordanBlock(Eigenvalue(2)), JordanBlock(Eigenvalue(3)))
    C_ok = np.array([[1, 0, 0, 1], [0, 5, 1, 0]])
    rep = observable_eigen_report(SystemSpec(blocks, np.eye(4), C_ok))
    assert rep[Eigenvalue(2)]["observable"] and rep[Eigenvalue(3)]["observable"]
    # columns 1 and 3 parallel: eigenvalue 2 loses observability, 3 keeps it
    C_bad = np.array([[1, 0, 2, 1], [1, 7, 2, 0]])
    rep = observable_eigen_report(SystemSpec(blocks, np.eye(4), C_bad))
    assert not rep[Eigenvalue(2)]["observable"]
    assert rep[Eigenvalue(3)]["observable"]
    # eigenvalue 3 unobservable when its column is zero
    C_zero3 = np.array([[1, 0, 0, 0], [0, 0, 1, 0]])
    assert not observable_eigen_report(SystemSpec(blocks, np.eye(4), C_zero3))[Eigenvalue(3)]["observable"]


def test_observable_identity_and_zero():
    spec = diagonal_spec([2, 3], np.eye(2))
    assert all(v["observable"] for v in observable_eigen_report(spec).values())
    spec = diagonal_spec([2, 3], np.zeros((1, 2)))
    assert not any(v["observable"] for v in observable_eigen_report(spec).values())


def test_approximate_rational_phase_examples():
    assert approximate_rational_phase(math.pi, 16) == Fraction(1, 2)
    assert approximate_rational_phase(2 * math.pi * 9 / 16, 64) == Fraction(9, 16)
    r = approximate_rational_phase(math.sqrt(2), 64, 1e-9)
    assert isinstance(r, Irrational) and r.theta == math.sqrt(2)
    assert approximate_rational_phase(-math.pi / 2, 8) == Fraction(3, 4)


def test_from_complex():
    assert Eigenvalue.from_complex(-2) == Eigenvalue(2, Fraction(1, 2))
    e = Eigenvalue.from_complex(2 * cmath.exp(1j))
    assert isinstance(e.phase, Irrational)
    assert abs(e.value - 2 * cmath.exp(1j)) < 1e-14


@st.composite
def complex_matrices(draw, max_rows=5, max_cols=4):
    r = draw(st.integers(1, max_rows))
    c = draw(st.integers(1, max_cols))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((r, c)) + 1j * rng.standard_normal((r, c))
    # knock out rank sometimes
    if draw(st.booleans()) and r > 1:
        M[-1] = M[0] * (0.3 - 0.7j)
    return M, rng


@settings(max_examples=60, deadline=None)
@given(complex_matrices())
def test_rank_invariant_under_permutation_and_unit_scaling(data):
    M, rng = data
    base = rank_with_tolerance(M)
    perm = rng.permutation(M.shape[0])
    phases = np.exp(2j * np.pi * rng.random(M.shape[0]))
    assert rank_with_tolerance(M[perm]) == base
    assert rank_with_tolerance(M * phases[:, None]) == base


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(0.1, 5), st.integers(0, 11), st.integers(1, 12), st.integers(1, 3)),
                min_size=1, max_size=4))
def test_jordan_diagonal_reproduces_eigenvalues(items):
    blocks = [JordanBlock(Eigenvalue(m, Fraction(n, d)), k) for m, n, d, k in items]
    A = matrix_from_jordan(blocks)
    expected = [b.eig.value for b in blocks for _ in range(b.size)]
    assert list(np.diag(A)) == expected


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 64), st.integers(-200, 200))
def test_rational_phase_roundtrip(q, p):
    f = approximate_rational_phase(2 * math.pi * p / q, max_den=64)
    assert f == Fraction(p, q) % 1

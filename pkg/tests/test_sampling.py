import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from erasurekf.config import SimConfig
from erasurekf.model import Eigenvalue, diagonal_spec
from erasurekf.sampling import (
    ContinuousBlock,
    ContinuousSpec,
    apply_time_varying_filter,
    continuous_critical,
    discretize_nonuniform,
    filtered_model,
    integrate_expm,
    integrated_C,
    jordan_expm,
    observation_noise_cov,
    process_noise_cov,
    sample_jitter,
    uniform_sampled_spec,
)
from erasurekf.sim import sweep_threshold
from erasurekf.spectral import critical_erasure, partition_cycles
from oracles import dense_jordan, euler_maruyama_window_residual, expm_integral_quadrature

LN2 = math.log(2)


def cspec(blocks, C, **kw):
    m = sum(b.size for b in blocks)
    return ContinuousSpec(tuple(blocks), kw.pop("B", np.eye(m)), C, kw.pop("D", np.eye(len(C))), **kw)


@st.composite
def cont_blocks(draw, max_m=3):
    rng = np.random.default_rng(draw(st.integers(0, 2**32 - 1)))
    blocks, m = [], 0
    while m < max_m:
        size = int(rng.integers(1, max_m - m + 1))
        blocks.append(ContinuousBlock(float(rng.uniform(-1, 1)), float(rng.uniform(-3, 3)), size))
        m += size
        if rng.random() < 0.4:
            break
    return blocks, rng


def test_jordan_expm_examples():
    assert np.array_equal(jordan_expm([(0, 2)], 1.0), [[1, 1], [0, 1]])
    assert jordan_expm([(0.7, 1)], 2.0)[0, 0] == pytest.approx(math.exp(1.4))


@settings(max_examples=40, deadline=None)
@given(cont_blocks(), st.floats(-10, 10))
def test_expm_inverse_and_reference(data, t):
    blocks, _ = data
    E = jordan_expm(blocks, t)
    Einv = jordan_expm(blocks, -t)
    assert np.allclose(E @ Einv, np.eye(E.shape[0]), atol=1e-12 * max(1, np.abs(E).max() * np.abs(Einv).max()))
    A = dense_jordan([(b.lam, b.size) for b in blocks])
    assert np.allclose(E, expm(A * t), rtol=1e-10, atol=1e-12 * np.abs(E).max())


@settings(max_examples=40, deadline=None)
@given(cont_blocks(), st.floats(-5, 5), st.floats(-5, 5))
def test_expm_semigroup(data, t1, t2):
    blocks, _ = data
    lhs = jordan_expm(blocks, t1) @ jordan_expm(blocks, t2)
    rhs = jordan_expm(blocks, t1 + t2)
    assert np.allclose(lhs, rhs, rtol=1e-11, atol=1e-11 * np.abs(rhs).max())


def test_integrated_C_examples():
    assert integrated_C(cspec([ContinuousBlock(0.0)], [[1]])) == pytest.approx(1.0)
    spec = cspec([ContinuousBlock(0.0, 2 * math.pi)], [[1]])
    assert abs(integrated_C(spec)[0, 0]) < 1e-15


@settings(max_examples=25, deadline=None)
@given(cont_blocks())
def test_integrated_C_against_quadrature(data):
    blocks, rng = data
    m = sum(b.size for b in blocks)
    C = rng.standard_normal((2, m))
    spec = cspec(blocks, C)
    A = dense_jordan([(b.lam, b.size) for b in blocks])
    ref = C @ expm_integral_quadrature(A, -1.0, 0.0)
    assert np.allclose(integrated_C(spec), ref, rtol=1e-9, atol=1e-9)


@pytest.mark.parametrize("lam,a,b", [(1e-9, -1, 0), (0.3, -0.5, 0.2), (-2 + 1j, -3, 0), (0.0, -2, 1)])
def test_integrate_expm_branches(lam, a, b):
    blocks = [ContinuousBlock(complex(lam).real, complex(lam).imag, 3)]
    A = dense_jordan([(lam, 3)])
    assert np.allclose(integrate_expm(blocks, a, b), expm_integral_quadrature(A, a, b), rtol=1e-10, atol=1e-12)


def test_jitter_modes():
    assert np.array_equal(sample_jitter("none", 5, 0.5).values, np.zeros(5))
    w = sample_jitter("weyl_sqrt2", 3, 1.0).values
    r2 = math.sqrt(2)
    assert np.allclose(w, [r2 - 1, 2 * r2 - 2, 3 * r2 - 4], atol=1e-15)
    assert np.array_equal(w, sample_jitter("weyl_sqrt2", 3, 1.0, seed=99).values)
    n, T = 20000, 0.8
    u = sample_jitter("iid_uniform", n, T, seed=4).values
    sigma = T / math.sqrt(12)
    assert abs(u.mean() - T / 2) < 3 * sigma / math.sqrt(n)
    assert np.array_equal(u, sample_jitter("iid_uniform", n, T, seed=4).values)


def test_general_density():
    d = sample_jitter("general_density", 5000, 1.0, 2,
                      {"type": "piecewise", "edges": [0, 0.5, 1], "density": [0, 2]}).values
    assert d.min() >= 0.5 and d.max() <= 1.0
    b = sample_jitter("general_density", 5000, 2.0, 2, {"type": "beta", "a": 2, "b": 2}).values
    assert abs(b.mean() - 1.0) < 0.05
    with pytest.raises(ValueError, match="unbounded"):
        sample_jitter("general_density", 10, 1.0, 0, {"type": "beta", "a": 0.5, "b": 2})
    with pytest.raises(ValueError, match="bounded"):
        sample_jitter("general_density", 10, 1.0, 0,
                      {"type": "piecewise", "edges": [0, 1], "density": [math.inf]})


def _ln2_spec(**kw):
    return cspec([ContinuousBlock(LN2), ContinuousBlock(LN2, math.pi)], [[1, 1]], **kw)


def test_zero_jitter_reproduces_uniform_transition():
    spec = cspec([ContinuousBlock(LN2)], [[1]])
    d = discretize_nonuniform(spec, sample_jitter("none", 11, 0.5), 10)
    assert d.model.A.shape[0] == 1
    assert d.model.A[0, 0, 0] == pytest.approx(2.0, rel=1e-15)
    spec2 = _ln2_spec()
    d2 = discretize_nonuniform(spec2, sample_jitter("none", 11, 0.5), 10)
    assert np.array_equal(d2.model.A[0], jordan_expm(spec2.blocks, 1.0))


def test_unit_wiener_variance():
    spec = cspec([ContinuousBlock(0.0)], [[1]])
    assert process_noise_cov(spec, 1.0)[0, 0] == pytest.approx(1.0, rel=1e-12)


def test_integrated_C_independent_of_jitter():
    spec = _ln2_spec()
    a = discretize_nonuniform(spec, sample_jitter("iid_uniform", 51, 0.5, 1), 50)
    b = discretize_nonuniform(spec, sample_jitter("iid_uniform", 51, 0.5, 2), 50)
    c = discretize_nonuniform(spec, sample_jitter("weyl_sqrt2", 51, 0.5), 50)
    assert np.array_equal(a.model.C, b.model.C) and np.array_equal(a.model.C, c.model.C)
    assert not np.array_equal(a.model.A, b.model.A)


def test_interval_variant_changes_C():
    spec = _ln2_spec(jitter_mode="interval_variant")
    jit = sample_jitter("interval_variant", 21, 0.5, 3)
    d = discretize_nonuniform(spec, jit, 20)
    assert d.model.C.shape[0] == 20
    ref = spec.C @ integrate_expm(spec.blocks, -(1.0 + jit.values[4]), 0.0)
    assert np.allclose(d.model.C[4], ref, rtol=1e-14)


def test_reordering_guard():
    spec = cspec([ContinuousBlock(0.1)], [[1]], T=1.5)
    jit = sample_jitter("none", 4, 1.5)
    jit = type(jit)("iid_uniform", np.array([0.0, 1.2, 0.0, 0.0]), 1.5)
    with pytest.raises(ValueError, match="not increasing"):
        discretize_nonuniform(spec, jit, 3)


def test_short_jitter_rejected():
    with pytest.raises(ValueError, match="jitter values"):
        discretize_nonuniform(_ln2_spec(), sample_jitter("none", 5, 0.5), 5)


def test_observation_noise_against_euler_maruyama():
    lam, I = 0.3, 1.0
    spec = cspec([ContinuousBlock(lam)], [[1]], B=[[1.0]], D=[[0.5]])
    Rd = observation_noise_cov(spec, I)[0, 0].real
    res = euler_maruyama_window_residual(lam, 1.0, 1.0, 0.5, I, 10000, 1000, np.random.default_rng(8))
    assert abs(res.var() - Rd) / Rd < 0.05


def test_continuous_critical_examples():
    spec = cspec([ContinuousBlock(LN2)], [[1]])
    assert continuous_critical(spec)["critical"] == pytest.approx(0.25, rel=1e-14)
    stable = cspec([ContinuousBlock(-0.3), ContinuousBlock(-1.0, 2.0)], [[1, 1]])
    assert continuous_critical(stable)["critical"] == 1.0
    hidden = cspec([ContinuousBlock(1.0), ContinuousBlock(-0.5)], [[0, 1]])
    res = continuous_critical(hidden)
    assert res["critical"] == 0.0 and res["unobservable_unstable"]


def test_ln2_pair_thresholds():
    spec = _ln2_spec()
    uni = uniform_sampled_spec(spec)
    assert [c.period for c in partition_cycles(uni)] == [2]
    assert critical_erasure(uni).critical == pytest.approx(1 / 16, rel=1e-12)
    assert continuous_critical(spec.with_mode("weyl_sqrt2"))["critical"] == pytest.approx(0.25, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(cont_blocks())
def test_continuous_matches_discrete_without_cycles(data):
    blocks, rng = data
    # irrational imaginary parts relative to 2*pi almost surely leave no cycles
    m = sum(b.size for b in blocks)
    spec = cspec(blocks, rng.standard_normal((1, m)) + 1.0)
    uni = uniform_sampled_spec(spec)
    if any(c.period > 1 for c in partition_cycles(uni)):
        return
    assert critical_erasure(uni).critical == pytest.approx(continuous_critical(spec)["critical"], rel=1e-9)


def test_uniform_sampled_spec_preserves_markov_parameters():
    spec = cspec([ContinuousBlock(0.2, 0.5, 2), ContinuousBlock(-0.1)], np.array([[1.0, 0.3, 2.0]]))
    uni = uniform_sampled_spec(spec)
    E = jordan_expm(spec.blocks, 1.0)
    Cbar = integrated_C(spec)
    W = process_noise_cov(spec, 1.0)
    for k in range(4):
        lhs = uni.C @ np.linalg.matrix_power(uni.A, k) @ uni.B
        rhs_gram = Cbar @ np.linalg.matrix_power(E, k) @ W @ np.linalg.matrix_power(E, k).conj().T @ Cbar.conj().T
        assert np.allclose(lhs @ lhs.conj().T, rhs_gram, rtol=1e-10)


def test_filter_examples():
    y = np.arange(6.0).reshape(3, 2)
    assert np.array_equal(apply_time_varying_filter(y, np.ones(3), np.zeros(3)), y)
    c = np.full((4, 1), 2.5)
    out = apply_time_varying_filter(c, np.ones(4), np.ones(4))
    assert out[0, 0] == 2.5 and np.all(out[1:] == 5.0)
    with pytest.raises(ValueError):
        apply_time_varying_filter(y, np.ones(2), np.ones(3))


def test_filtered_model_breaks_cycle():
    d = diagonal_spec([Eigenvalue(2), Eigenvalue(2, Fraction(1, 2))], [[1, 1]])
    rng = np.random.default_rng(1)
    H = 2000
    model = filtered_model(d, rng.uniform(0, 1, H), rng.uniform(0, 1, H))
    res = sweep_threshold(model, [0.05, 0.1, 0.15, 0.2, 0.3, 0.35], SimConfig())
    lo, hi = res.interval
    assert lo < 0.25 < hi and lo > 0.0625

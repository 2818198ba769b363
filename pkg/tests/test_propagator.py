import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from qcycle import ModelParams, _kernels
from qcycle.propagator import FluxCounters, accumulate_fluxes, dense_expm_reference, evolve
from qcycle.rates import RateMatrix, build_generator
from qcycle.validation import grand_canonical, random_generator


def two_state(a, b):
    return np.array([[-a, b], [a, -b]], dtype=float)


def test_zero_generator_is_identity():
    P = np.array([0.2, 0.3, 0.5])
    assert np.array_equal(evolve(P, np.zeros((3, 3)), 0.7), P)


def test_two_state_relaxation():
    P = evolve(np.array([1.0, 0.0]), two_state(1.0, 3.0), 0.5)
    assert P[0] == pytest.approx(0.75 + 0.25 * math.exp(-2.0), abs=1e-12)
    assert P[0] == pytest.approx(0.78384, abs=1e-5)


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        evolve(np.array([1.0, 0.0]), two_state(1, 1), -1e-3)
    with pytest.raises(ValueError):
        evolve(np.array([1.0, 0.1]), two_state(1, 1), 1e-3)
    with pytest.raises(ValueError):
        dense_expm_reference(two_state(1, 1), -1.0)


def test_dense_reference_trivia():
    assert np.array_equal(dense_expm_reference(two_state(2, 5), 0.0), np.eye(2))
    N = np.array([[0.0, 1.7], [0.0, 0.0]])
    assert np.allclose(dense_expm_reference(N, 1.0), np.eye(2) + N, atol=0, rtol=0)


def test_dense_reference_is_stochastic(rng):
    for _ in range(10):
        E = dense_expm_reference(random_generator(rng, 16), 0.3)
        assert np.max(np.abs(E.sum(axis=0) - 1)) <= 1e-10


@pytest.mark.parametrize("x", [-2.0, -0.4, 1.3])
def test_full_generator_against_dense(x, rng):
    L = build_generator(x, ModelParams())
    P = rng.random(256)
    P /= P.sum()
    ref = dense_expm_reference(L, 1e-3) @ P
    assert np.max(np.abs(evolve(P, L, 1e-3) - ref)) <= 1e-8


def test_long_step_uses_substeps(rng):
    # nu * dt far above the per-substep Poisson mean limit
    L = random_generator(rng, 16) * 400.0
    P = np.full(16, 1 / 16)
    ref = dense_expm_reference(L, 1.0) @ P
    assert np.max(np.abs(evolve(P, L, 1.0) - ref)) <= 1e-8


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0))
def test_positivity_and_normalization(seed, dt):
    rng = np.random.default_rng(seed)
    L = random_generator(rng, 12)
    P = rng.dirichlet(np.ones(12))
    out = evolve(P, L, dt)
    assert out.min() >= -1e-12
    assert abs(out.sum() - 1) <= 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 0.1), st.floats(0.0, 0.1))
def test_semigroup(seed, s, t):
    rng = np.random.default_rng(seed)
    L = random_generator(rng, 10) * 5
    P = rng.dirichlet(np.ones(10))
    assert np.max(np.abs(evolve(evolve(P, L, s), L, t) - evolve(P, L, s + t))) <= 1e-8


def test_norm_drift_over_many_steps():
    L = build_generator(-1.0, ModelParams())
    P = np.zeros(256)
    P[0] = 1.0
    for _ in range(2000):
        P = evolve(P, L, 1e-3)
    assert abs(P.sum() - 1) <= 1e-9


def test_grand_canonical_fixed_point():
    mu = 10.0
    p = ModelParams(mu_Fd=mu, mu_Pc=mu, mu_N=mu, mu_P=mu)
    for x in (-2.0, 0.3, 1.9):
        P = grand_canonical(x, p, mu)
        assert np.max(np.abs(evolve(P, build_generator(x, p), 0.5) - P)) <= 1e-6


def test_time_integral_matches_van_loan(rng):
    L = random_generator(rng, 8) * 3
    P = rng.dirichlet(np.ones(8))
    R = RateMatrix.from_dense(L)
    out = np.empty(8)
    integral = np.empty(8)
    _kernels.uniformize(P, R.src, R.dst, R.rates, 0.4, 1e-12, out, integral)
    n = 8
    aug = np.zeros((2 * n, 2 * n))
    aug[:n, :n] = L
    aug[:n, n:] = np.eye(n)
    block = scipy.linalg.expm(aug * 0.4)[:n, n:]
    assert np.max(np.abs(integral - block @ P)) <= 1e-10
    assert integral.sum() == pytest.approx(0.4, abs=1e-12)


def test_flux_trivia():
    L = RateMatrix.from_arrays([0], [1], [2.5], n_states=2, tags=[[1, 0, 0]])
    P = np.array([0.4, 0.6])
    c = accumulate_fluxes(P, P, L, 1e-3)
    assert c.n_e == pytest.approx(2.5 * 0.4 * 1e-3)
    zero = RateMatrix.from_arrays([0], [1], [0.0], n_states=2, tags=[[1, 1, 1]])
    start = FluxCounters(1.0, 2.0, 3.0)
    assert accumulate_fluxes(P, P, zero, 1e-3, start).as_array().tolist() == [1.0, 2.0, 3.0]
    both = RateMatrix.from_arrays([0, 1], [1, 0], [1.0, 1.0], n_states=2,
                                  tags=[[1, 0, 0], [-1, 0, 0]])
    half = np.array([0.5, 0.5])
    assert accumulate_fluxes(half, half, both, 1e-3).n_e == 0.0

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hybridnls.errors import GridMismatch, InvalidParameter
from hybridnls.nonlinearity import (
    Power, abs_pow, g_difference, hamiltonian_density_gradient, n_p, potential_density, taylor_remainders,
)
from hybridnls.spectral import ComplexField, TorusGrid

from conftest import random_torus_field

G = TorusGrid(16)
seeds = st.integers(0, 2**32 - 1)
powers = st.sampled_from([2.0, 2.5, 3.0, 3.5, 4.0, 5.0, 7.0])


def const(c):
    return ComplexField(G, np.full(G.n, c, dtype=complex))


def test_power():
    assert Power(3).is_odd_integer and Power(7).is_odd_integer
    assert not Power(4).is_odd_integer and not Power(3.5).is_odd_integer
    assert Power(3.9).floor_p == 3 and Power(4).floor_p == 4
    with pytest.raises(InvalidParameter):
        Power(1.5)


def test_abs_pow_conventions():
    z = np.array([0.0, 3 + 4j])
    np.testing.assert_allclose(abs_pow(z, 0), [1, 1])
    np.testing.assert_allclose(abs_pow(z, 1.5), [0, 5**1.5])
    np.testing.assert_allclose(abs_pow(z, 2), [0, 25])


def test_n_p_examples():
    np.testing.assert_array_equal(n_p(const(0), 3).values, 0)
    np.testing.assert_allclose(n_p(const(2), 3).values, 8)
    np.testing.assert_allclose(n_p(const(1 + 1j), 3).values, 2 * (1 + 1j))
    # continuity at zero for non-integer p
    assert np.all(np.isfinite(n_p(const(0), 2.5).values))


@given(seeds, powers, st.floats(-10, 10))
def test_gauge_covariance(seed, p, theta):
    u = random_torus_field(np.random.default_rng(seed), 16, kmax=5)
    rot = np.exp(1j * theta)
    np.testing.assert_allclose(n_p(u * rot, p).values, rot * n_p(u, p).values, rtol=1e-13, atol=1e-15)


def test_g_examples(rng):
    v = random_torus_field(rng, 16, kmax=5)
    w = random_torus_field(rng, 16, kmax=5)
    np.testing.assert_array_equal(g_difference(v, v, w, 3).values, 0)
    np.testing.assert_allclose(g_difference(v, const(0), const(0), 3.5).values, n_p(v, 3.5).values, rtol=1e-14)
    np.testing.assert_allclose(g_difference(const(1), const(0), const(1), 3).values, 7)
    with pytest.raises(GridMismatch):
        g_difference(v, ComplexField.zeros(TorusGrid(32)), w, 3)


@given(seeds, powers)
def test_g_antisymmetry(seed, p):
    rng = np.random.default_rng(seed)
    v1, v2, w = (random_torus_field(rng, 16, kmax=5) for _ in range(3))
    np.testing.assert_array_equal(g_difference(v1, v2, w, p).values, -g_difference(v2, v1, w, p).values)


def test_taylor_examples(rng):
    w = random_torus_field(rng, 16, kmax=5)
    for r in taylor_remainders(const(0), w, 4):
        np.testing.assert_allclose(r.values, 0, atol=1e-15)
    v = random_torus_field(rng, 16, kmax=5)
    np.testing.assert_allclose(taylor_remainders(v, const(0), 3)[1].values, 0, atol=1e-15)
    r1 = taylor_remainders(const(1), const(1), 3)[0]
    np.testing.assert_allclose(r1.values, 1.0)
    with pytest.raises(InvalidParameter):
        taylor_remainders(v, w, 2.5)


def test_gradient_examples(rng):
    v = random_torus_field(rng, 16, kmax=5)
    w = random_torus_field(rng, 16, kmax=5)
    np.testing.assert_array_equal(hamiltonian_density_gradient(const(0), w, 3).values, 0)
    np.testing.assert_allclose(hamiltonian_density_gradient(v, const(0), 4).values, n_p(v, 4).values)


@pytest.mark.parametrize("p", [3.0, 3.5, 4.0, 5.0])
def test_gradient_matches_finite_difference(p):
    rng = np.random.default_rng(11)
    eps = 1e-6
    worst = 0.0
    for _ in range(50):
        v, w, h = (random_torus_field(rng, 16, kmax=5, amp=0.5) for _ in range(3))
        dens = lambda a: float(np.sum(potential_density(a, w, p).values.real)) * G.dx  # noqa: E731
        fd = (dens(v + h * eps) - dens(v - h * eps)) / (2 * eps)
        pairing = float(np.real(np.sum(hamiltonian_density_gradient(v, w, p).values * np.conj(h.values)))) * G.dx
        worst = max(worst, abs(fd - pairing) / abs(pairing))
    assert worst <= 1e-5

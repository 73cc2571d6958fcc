import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from brgate import generators as gen
from brgate.operators import (BLOCH_U, I2, SX, SY, SZ, MalformedGenerator, bloch_basis_transform,
                              bloch_superop, coupling_operator, dagger, density_matrix, free_generator,
                              free_hamiltonian, free_propagator, gate_unitary, hamiltonian_generator,
                              interaction_rotation, min_eigenvalue, so3, su2_exp, vectorize)
from brgate.specs import BathSpec, ConfigError, ModelSpec, PulseSpec

angles = st.floats(-10.0, 10.0, allow_nan=False)
bloch = st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)).filter(
    lambda v: np.linalg.norm(v) <= 1)


def vec(rho):
    return rho.reshape(-1, order="F")


def superop(f):
    """Tensor-basis matrix of a linear map on 2x2 matrices, built column by column."""
    cols = []
    for k in range(4):
        e = np.zeros(4, dtype=complex)
        e[k] = 1
        cols.append(vec(f(e.reshape(2, 2, order="F"))))
    return np.array(cols).T


# --- records ---------------------------------------------------------------

def test_specs_reject_invalid_values():
    with pytest.raises(ConfigError):
        ModelSpec(delta=0)
    with pytest.raises(ConfigError):
        BathSpec(-1.0)
    with pytest.raises(ConfigError):
        BathSpec(0.1, s=0)
    with pytest.raises(ConfigError):
        PulseSpec(1.0, tau_p1=2.0, tau_p2=1.0)
    with pytest.raises(ConfigError):
        PulseSpec(1.0, fourier=(1.0,))


def test_pulse_operating_frequency():
    assert PulseSpec(math.pi, 0.0, 2.0).omega_p == pytest.approx(math.pi / 2, rel=1e-12)
    assert math.isinf(PulseSpec(math.pi / 2).omega_p)


# --- coupling and propagators ----------------------------------------------

def test_coupling_operator_examples():
    assert np.allclose(coupling_operator(ModelSpec(1.0, xi=0.0)), SX / 2)
    assert np.allclose(coupling_operator(ModelSpec(1.0, xi=4.0)), (SX + 4 * SZ) / 2)
    assert np.allclose(coupling_operator(ModelSpec(1.0, xi=1.0, phi=math.pi / 2)), (SY + SZ) / 2)
    assert np.allclose(coupling_operator(ModelSpec(1.0, xi=2.0, transverse=0.0)), SZ)


def test_free_propagator_examples():
    m = ModelSpec(1.0)
    assert np.allclose(free_propagator(m, 0.0), I2)
    assert np.allclose(free_propagator(m, 2 * math.pi), -I2)
    u = free_propagator(m, math.pi)
    assert np.allclose(u @ SX @ dagger(u), -SX)
    assert np.allclose(free_propagator(m, 0.7), expm(-1j * free_hamiltonian(m) * 0.7), atol=1e-14)


@given(st.floats(-1e4, 1e4), st.floats(0.1, 5.0))
def test_free_propagator_unitary(t, delta):
    u = free_propagator(ModelSpec(delta), t)
    assert np.max(np.abs(dagger(u) @ u - I2)) < 1e-12


def test_gate_unitary_examples():
    assert np.allclose(gate_unitary(PulseSpec(0.0)), I2)
    assert np.allclose(gate_unitary(PulseSpec(2 * math.pi)), -I2)
    u = gate_unitary(PulseSpec(math.pi / 2))
    n = vectorize(u @ density_matrix([0, 0, 1]) @ dagger(u))
    assert np.allclose(n, [0, -1, 0], atol=1e-14)


def test_interaction_rotation_examples():
    m = ModelSpec(1.0)
    p = PulseSpec(math.pi / 2)
    assert np.array_equal(interaction_rotation(m, p, 0.0), gate_unitary(p))
    assert np.allclose(interaction_rotation(m, PulseSpec(2 * math.pi), 1.3), -I2)
    assert np.allclose(interaction_rotation(m, p, math.pi), expm(1j * math.pi * SX / 4))


@given(angles, st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)).filter(
    lambda v: np.linalg.norm(v) > 0.1))
def test_su2_exp_matches_matrix_exponential(angle, axis):
    axis = np.asarray(axis) / np.linalg.norm(axis)
    h = axis[0] * SX + axis[1] * SY + axis[2] * SZ
    assert np.allclose(su2_exp(angle, axis), expm(-0.5j * angle * h), atol=1e-12)


# --- Bloch representation --------------------------------------------------

def test_vectorize_examples():
    assert np.allclose(vectorize(I2 / 2), 0)
    assert np.allclose(vectorize(np.diag([1, 0])), [0, 0, 1])
    assert np.allclose(vectorize((I2 + SX) / 2), [1, 0, 0])
    with pytest.raises(ValueError):
        vectorize(I2)


@given(bloch)
def test_vectorize_round_trip(n):
    assert np.allclose(vectorize(density_matrix(n)), n, atol=1e-14)
    rho = density_matrix(n)
    assert np.allclose(density_matrix(vectorize(rho)), rho, atol=1e-14)


def test_bloch_basis_is_unitary_and_maps_states():
    assert np.allclose(dagger(BLOCH_U) @ BLOCH_U, np.eye(4))
    n = np.array([0.3, -0.2, 0.5])
    y = dagger(BLOCH_U) @ vec(density_matrix(n))
    assert np.allclose(y * math.sqrt(2), np.concatenate([[1], n]))


def test_bloch_basis_transform_examples():
    assert np.array_equal(bloch_basis_transform(np.zeros((4, 4))), np.zeros((4, 4)))
    m = ModelSpec(1.3)
    h = free_hamiltonian(m)
    g = bloch_basis_transform(superop(lambda r: -1j * (h @ r - r @ h)))
    assert np.allclose(g, free_generator(m), atol=1e-14)
    assert g[1, 2] == pytest.approx(1.3) and g[2, 1] == pytest.approx(-1.3)
    with pytest.raises(MalformedGenerator):
        bloch_basis_transform(1j * np.eye(4))


def test_markov_generator_pattern():
    m, b = ModelSpec(1.0, xi=4.0), BathSpec(0.02, 1.0, 1.0, 0.0)
    g = gen.markov_generator(m, b)
    jd = 2 * math.pi * 0.02 * math.exp(-1)
    assert np.all(g[0] == 0)
    assert g[3, 0] == pytest.approx(jd / 2, rel=1e-6)
    assert g[3, 3] == pytest.approx(-jd / 2, rel=1e-6)
    assert g[1, 3] == pytest.approx(4 * jd / 2, rel=1e-6)


@given(angles, st.floats(0, math.pi), angles)
def test_so3_agrees_with_conjugation(a, b, c):
    u = su2_exp(a, [0, 0, 1]) @ su2_exp(b, [1, 0, 0]) @ su2_exp(c, [0, 0, 1])
    n = np.array([0.2, -0.5, 0.6])
    assert np.allclose(so3(u) @ n, vectorize(u @ density_matrix(n) @ dagger(u)), atol=1e-12)
    o = bloch_superop(u)
    assert np.allclose(o[1:, 1:].T @ o[1:, 1:], np.eye(3), atol=1e-12)


@given(st.tuples(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3)), bloch)
def test_hamiltonian_generator_is_cross_product(h, n):
    h, n = np.asarray(h), np.asarray(n)
    g = hamiltonian_generator(h)
    assert np.allclose(g[1:, 1:] @ n, np.cross(h, n), atol=1e-12)
    hm = 0.5 * (h[0] * SX + h[1] * SY + h[2] * SZ)
    ref = bloch_basis_transform(superop(lambda r: -1j * (hm @ r - r @ hm)))
    assert np.allclose(g, ref, atol=1e-12)


def test_min_eigenvalue():
    assert min_eigenvalue([0, 0, 1]) == pytest.approx(0)
    assert min_eigenvalue([0, 0, 0]) == pytest.approx(0.5)
    n = np.array([0.3, 0.4, 0.1])
    assert min_eigenvalue(n) == pytest.approx(np.linalg.eigvalsh(density_matrix(n)).min())

"""2x2 operator algebra, propagators and the real Bloch representation.

Conventions: hbar = 1, H0 = -(delta/2) sz, so the ground state |0> has n_z = +1.
sigma_+ = (sx + i sy)/2 = |0><1|.  Superoperators act on column-major
vectorized density matrices (rho00, rho10, rho01, rho11); the Bloch basis
vector is (1, nx, ny, nz).
"""
from __future__ import annotations

import numpy as np

from .specs import ModelSpec, PulseSpec

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
SP = (SX + 1j * SY) / 2
SM = (SX - 1j * SY) / 2
PAULI = np.stack([SX, SY, SZ])

# columns map the Bloch-basis vector (1, nx, ny, nz) onto column-major vec(rho)
BLOCH_U = np.array(
    [[1, 0, 0, 1],
     [0, 1, 1j, 0],
     [0, 1, -1j, 0],
     [1, 0, 0, -1]],
    dtype=complex,
) / np.sqrt(2)

IMAG_TOL = 1e-10


class MalformedGenerator(ArithmeticError):
    """A superoperator that should be real in the Bloch basis is not."""


def dagger(x):
    return np.conj(np.swapaxes(x, -1, -2))


def conjugate(u, x):
    """u x u^dagger, broadcasting over leading axes."""
    return u @ x @ dagger(u)


def pauli_matrix(v):
    """v . sigma for a (possibly complex) Pauli vector v of shape (..., 3)."""
    v = np.asarray(v)
    return np.einsum("...k,kij->...ij", v, PAULI)


def pauli_components(x):
    """Coefficients (c0, cx, cy, cz) with x = c0 I + c . sigma."""
    x = np.asarray(x, dtype=complex)
    c0 = 0.5 * np.trace(x, axis1=-2, axis2=-1)
    c = 0.5 * np.einsum("kji,...ij->...k", PAULI, x)
    return c0, c


def su2_exp(angle, axis):
    """exp(-i angle (axis . sigma) / 2) for a real unit axis; angle may be an array."""
    angle = np.asarray(angle, dtype=float)
    axis = np.asarray(axis, dtype=float)
    half = angle[..., None, None] / 2
    return np.cos(half) * I2 - 1j * np.sin(half) * pauli_matrix(axis)


def coupling_operator(m: ModelSpec) -> np.ndarray:
    return 0.5 * (m.transverse * (np.cos(m.phi) * SX + np.sin(m.phi) * SY) + m.xi * SZ)


def free_hamiltonian(m: ModelSpec) -> np.ndarray:
    return -0.5 * m.delta * SZ


def free_propagator(m: ModelSpec, t) -> np.ndarray:
    """exp(-i H0 t) = exp(+i delta t sz / 2), diagonal; vectorized over t."""
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = np.exp(0.5j * m.delta * t)
    out[..., 1, 1] = np.exp(-0.5j * m.delta * t)
    return out


def gate_axis(p: PulseSpec) -> np.ndarray:
    return np.array([np.cos(p.axis_phase), np.sin(p.axis_phase), 0.0])


def rotation(p: PulseSpec, angle) -> np.ndarray:
    """Rotating-frame drive propagator exp(-i angle (n . sigma)/2) about the pulse axis."""
    return su2_exp(angle, gate_axis(p))


def gate_unitary(p: PulseSpec) -> np.ndarray:
    """Net rotating-frame gate U_c = exp(-i theta (n . sigma) / 2)."""
    return rotation(p, p.theta)


def interaction_rotation(m: ModelSpec, p: PulseSpec, x) -> np.ndarray:
    """U_c(x) = exp(i H0 x) U_c exp(-i H0 x); vectorized over x."""
    u0 = free_propagator(m, -np.asarray(x, dtype=float))
    return u0 @ gate_unitary(p) @ dagger(u0)


def density_matrix(n) -> np.ndarray:
    """rho = (I + n . sigma)/2, vectorized over leading axes of n."""
    n = np.asarray(n, dtype=float)
    return 0.5 * (I2 + pauli_matrix(n))


def devectorize(n) -> np.ndarray:
    return density_matrix(n)


def vectorize(rho, tol=1e-12) -> np.ndarray:
    """Bloch vector n_i = Tr(rho sigma_i); rejects non-unit trace."""
    rho = np.asarray(rho, dtype=complex)
    tr = np.trace(rho, axis1=-2, axis2=-1)
    if np.any(np.abs(tr - 1) > tol):
        raise ValueError(f"density matrix must have unit trace, got {tr}")
    return np.real(np.einsum("kji,...ij->...k", PAULI, rho))


def bloch_basis_transform(superop, tol=IMAG_TOL) -> np.ndarray:
    """U^dagger S U for a tensor-basis superoperator S; returns the real 4x4 part.

    The imaginary residue is checked against ``tol`` times the largest entry
    (with an absolute floor at ``tol``).
    """
    out = dagger(BLOCH_U) @ np.asarray(superop, dtype=complex) @ BLOCH_U
    scale = max(1.0, float(np.max(np.abs(out)))) if out.size else 1.0
    resid = np.max(np.abs(out.imag)) if out.size else 0.0
    if resid > tol * scale:
        raise MalformedGenerator(f"imaginary residue {resid:.3e} in Bloch-basis generator")
    return out.real


def hamiltonian_generator(h) -> np.ndarray:
    """Bloch-basis generator of -i[H, .] for H = h0 I + (h . sigma)/2 (h real, shape (..., 3)).

    dn/dt = h x n.
    """
    h = np.asarray(h, dtype=float)
    g = np.zeros(h.shape[:-1] + (4, 4))
    hx, hy, hz = h[..., 0], h[..., 1], h[..., 2]
    g[..., 1, 2], g[..., 1, 3] = -hz, hy
    g[..., 2, 1], g[..., 2, 3] = hz, -hx
    g[..., 3, 1], g[..., 3, 2] = -hy, hx
    return g


def free_generator(m: ModelSpec) -> np.ndarray:
    """Generator of the free precession, +delta at (nx, ny) and -delta at (ny, nx)."""
    return hamiltonian_generator(np.array([0.0, 0.0, -m.delta]))


def so3(u) -> np.ndarray:
    """Rotation matrix O with u (n . sigma) u^dagger = (O n) . sigma; vectorized."""
    u = np.asarray(u, dtype=complex)
    rotated = u[..., None, :, :] @ PAULI @ dagger(u)[..., None, :, :]
    return np.real(0.5 * np.einsum("jba,...kab->...jk", PAULI, rotated))


def bloch_superop(u) -> np.ndarray:
    """4x4 Bloch-basis matrix of the unitary channel rho -> u rho u^dagger."""
    o = so3(u)
    out = np.zeros(o.shape[:-2] + (4, 4))
    out[..., 0, 0] = 1.0
    out[..., 1:, 1:] = o
    return out


def min_eigenvalue(n) -> np.ndarray:
    """Smallest eigenvalue (1 - |n|)/2 of the density matrix with Bloch vector n."""
    n = np.asarray(n, dtype=float)
    return 0.5 * (1 - np.linalg.norm(n, axis=-1))

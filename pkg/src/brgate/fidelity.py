"""Phase fidelity via trace distance, fidelity landscapes over pure targets, and gate scans.

F(theta, phi) = 1 - D(rho, rho'(theta, phi)) with rho' the pure state of polar
angle theta and azimuth phi.  Gate runs are evaluated in the interaction frame
anchored at the gate start, where a perfect x-rotation by theta sends the
ground state to (0, -sin theta, cos theta).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from . import evolve
from .operators import density_matrix
from .specs import BathSpec, ModelSpec, PulseSpec

GRID_THETA = 181
GRID_PHI = 361
REFINE_TOL = 1e-6
RATIO_FLOOR = 0.98


@dataclass(frozen=True)
class FidelityMap:
    theta_grid: np.ndarray
    phi_grid: np.ndarray
    values: np.ndarray          # shape (len(theta_grid), len(phi_grid))
    f_max: float
    theta_m: float
    phi_m: float

    def ratio(self, floor=RATIO_FLOOR):
        """F / F_max with entries below ``floor`` set to NaN (plotting window)."""
        r = self.values / self.f_max
        return np.where(r >= floor, r, np.nan)


def trace_distance(rho, target) -> np.ndarray:
    """Half the sum of singular values of rho - target; broadcasts over leading axes."""
    diff = np.asarray(rho, dtype=complex) - np.asarray(target, dtype=complex)
    return 0.5 * np.linalg.svd(diff, compute_uv=False).sum(axis=-1)


def target_vector(theta, phi) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    return np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi),
                     np.cos(theta) * np.ones_like(phi)], axis=-1)


def pure_target(theta, phi) -> np.ndarray:
    return density_matrix(target_vector(theta, phi))


def fidelity(final, theta, phi) -> np.ndarray:
    """1 - trace distance between the state with Bloch vector ``final`` and the pure target."""
    rho = density_matrix(final)
    return 1.0 - trace_distance(rho, pure_target(theta, phi))


def ideal_rotation_target(theta) -> np.ndarray:
    """Ground state rotated about x by theta: (0, -sin theta, cos theta)."""
    return np.array([0.0, -np.sin(theta), np.cos(theta)])


def _golden(f, x, step, tol):
    res = minimize_scalar(lambda y: -f(y), bounds=(x - step, x + step), method="bounded",
                          options={"xatol": tol})
    return (res.x, -res.fun) if -res.fun >= f(x) else (x, f(x))


def fidelity_map(final, n_theta=GRID_THETA, n_phi=GRID_PHI, tol=REFINE_TOL) -> FidelityMap:
    """Grid of F over theta in [0, pi], phi in (-pi, pi], refined at the argmax by bounded line searches."""
    final = np.asarray(final, dtype=float)
    thetas = np.linspace(0.0, np.pi, n_theta)
    phis = np.linspace(-np.pi, np.pi, n_phi + 1)[1:]
    values = fidelity(final, thetas[:, None], phis[None, :])
    i, j = np.unravel_index(int(np.argmax(values)), values.shape)
    th, ph, best = thetas[i], phis[j], float(values[i, j])
    dth, dph = thetas[1] - thetas[0], phis[1] - phis[0]
    for _ in range(50):
        th_new, _ = _golden(lambda t: float(fidelity(final, t, ph)), th, dth, tol)
        ph_new, val = _golden(lambda q: float(fidelity(final, th_new, q)), ph, dph, tol)
        moved = max(abs(th_new - th), abs(ph_new - ph))
        th, ph, best = th_new, ph_new, max(best, val)
        dth, dph = max(moved, tol), max(moved, tol)
        if moved < tol:
            break
    if th < 0:
        th, ph = -th, ph + np.pi
    if th > np.pi:
        th, ph = 2 * np.pi - th, ph + np.pi
    ph = (ph + np.pi) % (2 * np.pi) - np.pi
    return FidelityMap(thetas, phis, values, best, float(th), float(ph))


# ---------------------------------------------------------------------------
# gate runs

def gate_final_state(m: ModelSpec, b: BathSpec, p: PulseSpec, dt=0.01, history="dp", initial=None):
    """Interaction-frame Bloch vector at the end of the gate, starting from the asymptotic state."""
    cfg = evolve.SimConfig(m, b, p, t_end=p.tau_p2, dt=dt, history=history, frame="interaction",
                           initial=initial, record_stride=10**9)
    return evolve.integrate(cfg).bloch[-1]


def _square(theta, tau_p, axis_phase=0.0):
    return PulseSpec(theta, tau_p1=0.0, tau_p2=tau_p, axis_phase=axis_phase)


def _scan_point(args):
    m, b, theta, tau_p, dt, history, refine = args
    n = gate_final_state(m, b, _square(theta, tau_p), dt, history)
    tgt = ideal_rotation_target(theta)
    f = float(1.0 - trace_distance(density_matrix(n), density_matrix(tgt)))
    if refine:
        fm = fidelity_map(n)
        return f, fm.f_max, fm.theta_m, fm.phi_m, n
    return f, float((1 + np.linalg.norm(n)) / 2), np.nan, np.nan, n


def fidelity_scan_theta(m: ModelSpec, b: BathSpec, tau_p: float, thetas, dt=0.01, history="dp",
                        refine=True, mapper=map) -> dict:
    """Fidelity against the ideal target and F_max as functions of the rotation angle."""
    thetas = np.asarray(thetas, dtype=float)
    rows = list(mapper(_scan_point, [(m, b, float(t), tau_p, dt, history, refine) for t in thetas]))
    return {
        "theta": thetas,
        "fidelity": np.array([r[0] for r in rows]),
        "f_max": np.array([r[1] for r in rows]),
        "theta_m": np.array([r[2] for r in rows]),
        "phi_m": np.array([r[3] for r in rows]),
        "final": np.array([r[4] for r in rows]),
    }


def fidelity_scan_tp_theta(m: ModelSpec, b: BathSpec, taus, thetas, dt=0.01, history="dp",
                           refine=False, mapper=map) -> dict:
    """F and F_max over a (tau_p, theta) grid; rows follow ``taus``."""
    taus = np.asarray(taus, dtype=float)
    thetas = np.asarray(thetas, dtype=float)
    jobs = [(m, b, float(th), float(tp), dt, history, refine) for tp in taus for th in thetas]
    rows = list(mapper(_scan_point, jobs))
    shape = (taus.size, thetas.size)
    return {
        "tau_p": taus,
        "theta": thetas,
        "fidelity": np.array([r[0] for r in rows]).reshape(shape),
        "f_max": np.array([r[1] for r in rows]).reshape(shape),
    }

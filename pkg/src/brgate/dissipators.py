"""Filtered coupling operators Lambda(t) for static, gated and shaped-pulse histories.

Every Lambda here is a convolution int C(t - tau) U_S(t, tau) A U_S(tau, t) dtau
over some part of the past.  Writing the interaction-picture coupling operator
as a sum of phasors, A_I(tau) = sum_nu M_nu exp(i nu tau), turns each window
integral into differences of Gamma_{-nu}, which is how the square-pulse
operators are assembled.  Shaped pulses have no finite phasor expansion and are
convolved numerically.

Times passed to the public functions are absolute unless stated otherwise.
The pre-gate history is either fully equilibrated (``settle_time=None``, the
system and bath were factorized in the infinite past) or started from a
factorized state ``settle_time`` before the pulse.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import signal
from scipy.integrate import newton_cotes

from . import bath as bathmod
from .operators import (SP, SM, SZ, conjugate, coupling_operator, dagger, free_propagator,
                        gate_axis, gate_unitary, pauli_components, pauli_matrix, rotation)
from .specs import BathSpec, ConfigError, ModelSpec, PulseSpec

HISTORIES = ("dp", "factorized", "markov")


class UnsupportedConfiguration(ConfigError):
    """The requested closed form was derived for a narrower set of parameters."""


def _coupling_parts(m: ModelSpec):
    """A = a+ s+ + a- s- + az sz together with each part's free-evolution frequency.

    exp(i H0 tau) s+ exp(-i H0 tau) = exp(-i delta tau) s+.
    """
    return (
        (0.5 * m.transverse * np.exp(-1j * m.phi), SP, -m.delta),
        (0.5 * m.transverse * np.exp(1j * m.phi), SM, m.delta),
        (0.5 * m.xi, SZ, 0.0),
    )


def _gammas(b: BathSpec, freqs, t):
    """{w: Gamma_w(t)} for each distinct frequency."""
    t = np.asarray(t, dtype=float)
    return {w: bathmod.gamma_t(b, w, t) for w in set(freqs)}


def lambda_static(m: ModelSpec, b: BathSpec, t):
    """int_0^t C(tau) exp(-i H0 tau) A exp(i H0 tau) dtau (elapsed time t >= 0)."""
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape + (2, 2), dtype=complex)
    for coef, op, nu in _coupling_parts(m):
        if coef == 0:
            continue
        # exp(-i H0 tau) op exp(i H0 tau) = exp(-i nu tau) op
        out += coef * bathmod.gamma_t(b, -nu, t)[..., None, None] * op
    return out


def lambda_markov(m: ModelSpec, b: BathSpec):
    """Static Lambda with every Gamma replaced by its t -> infinity limit."""
    out = np.zeros((2, 2), dtype=complex)
    for coef, op, nu in _coupling_parts(m):
        if coef == 0:
            continue
        out += coef * bathmod.spectral_asymptotic(b, -nu) * op
    return out


def lambda_reservoir(m: ModelSpec, b: BathSpec, t, settle_time=None):
    """Lambda accumulated since the factorized start, seen at elapsed time t after the gate start.

    ``settle_time=None`` gives the static Markovian operator; otherwise the
    static operator at settle_time + t.
    """
    t = np.asarray(t, dtype=float)
    if settle_time is None:
        return np.broadcast_to(lambda_markov(m, b), t.shape + (2, 2)).copy()
    return lambda_static(m, b, settle_time + t)


def default_settle_time(b: BathSpec):
    """None when the equilibrated limit exists, else a finite settling time."""
    try:
        bathmod.spectral_asymptotic(b, 0.0)
    except bathmod.DivergentLimit:
        return bathmod.DEFAULT_HORIZON / b.omega_c
    return None


def lambda_instant_dp(m: ModelSpec, b: BathSpec, p: PulseSpec, t, settle_time=None):
    """Post-gate Lambda for an instantaneous gate; t is the elapsed time since the gate.

    U_c(-t) [Lambda_res - Lambda_static(t)] U_c(-t)^dagger + Lambda_static(t).
    """
    t = np.asarray(t, dtype=float)
    stat = lambda_static(m, b, t)
    res = lambda_reservoir(m, b, t, settle_time)
    u0 = free_propagator(m, t)
    ucm = u0 @ gate_unitary(p) @ dagger(u0)     # U_c(-t)
    return conjugate(ucm, res - stat) + stat


# ---------------------------------------------------------------------------
# square pulses

def square_phasors(m: ModelSpec, p: PulseSpec):
    """[(nu, M_nu)] with A_I(tau) = sum M_nu exp(i nu tau) inside a square pulse.

    tau is measured from the pulse start and A_I(tau) = U_S(tau)^dagger A U_S(tau)
    with U_S(tau) = exp(-i H0 tau) R(omega_p tau).
    """
    n = gate_axis(p)
    wp = p.omega_p
    pauli_vec = {
        id(SP): np.array([1, 1j, 0]) / 2,
        id(SM): np.array([1, -1j, 0]) / 2,
        id(SZ): np.array([0, 0, 1], dtype=complex),
    }
    terms = {}
    for coef, op, nu in _coupling_parts(m):
        if coef == 0:
            continue
        v = pauli_vec[id(op)]
        par = np.dot(n, v) * n
        perp = v - par
        cross = np.cross(n, v)
        # R(a)^dagger (v.s) R(a) = par + cos a perp - sin a (n x v)
        for k, vk in ((0, par), (1, perp / 2 - cross / 2j), (-1, perp / 2 + cross / 2j)):
            if not np.any(vk):
                continue
            key = (nu, k)
            terms[key] = terms.get(key, 0) + coef * pauli_matrix(vk)
    return [(nu + k * wp, mat) for (nu, k), mat in sorted(terms.items())]


def gate_propagator(m: ModelSpec, p: PulseSpec, t):
    """U_S(t, tau_p1) for absolute t >= tau_p1 (drive switched off after tau_p2)."""
    t = np.asarray(t, dtype=float)
    x = t - p.tau_p1
    angle = pulse_angle(p, np.minimum(t, p.tau_p2))
    return free_propagator(m, x) @ rotation(p, angle)


def pulse_angle(p: PulseSpec, t):
    """Accumulated rotation angle int_{tau_p1}^t eps dt' (exact for the cosine basis)."""
    t = np.asarray(t, dtype=float)
    x = np.clip(t - p.tau_p1, 0.0, p.duration)
    if p.instantaneous:
        return np.where(t >= p.tau_p1, p.theta, 0.0) * np.ones_like(x)
    ang = p.omega_p * x
    if p.fourier:
        for k, a in enumerate(p.fourier, start=1):
            ang = ang + a * np.sin(k * np.pi * x / p.duration)
    return ang


def pulse_drive(p: PulseSpec, t):
    """eps(t) = omega_p + sum_n a_n (n pi / tau_p) cos(n pi (t - tau_p1) / tau_p) inside the window."""
    t = np.asarray(t, dtype=float)
    x = t - p.tau_p1
    inside = (x >= 0) & (x <= p.duration)
    eps = np.full(t.shape, p.omega_p if not p.instantaneous else 0.0)
    if p.fourier and not p.instantaneous:
        for k, a in enumerate(p.fourier, start=1):
            eps = eps + a * (k * np.pi / p.duration) * np.cos(k * np.pi * x / p.duration)
    return np.where(inside, eps, 0.0)


def _dressing(m: ModelSpec, p: PulseSpec, t):
    """U_S(t, tau_p1) exp(i H0 (t - tau_p1)): conjugates the pre-gate remainder."""
    t = np.asarray(t, dtype=float)
    return gate_propagator(m, p, t) @ free_propagator(m, -(t - p.tau_p1))


def pre_gate_term(m: ModelSpec, b: BathSpec, p: PulseSpec, t, settle_time=None):
    """Dressed pre-gate memory, U [Lambda_res(x) - Lambda_static(x)] U^dagger, x = t - tau_p1."""
    t = np.asarray(t, dtype=float)
    x = t - p.tau_p1
    diff = lambda_reservoir(m, b, x, settle_time) - lambda_static(m, b, x)
    return conjugate(_dressing(m, p, t), diff)


def _window_sum(b: BathSpec, phasors, x, lo, hi):
    """sum_nu M_nu int_lo^hi C(x - tau) exp(i nu tau) dtau for 0 <= lo <= hi <= x."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape + (2, 2), dtype=complex)
    for nu, mat in phasors:
        g_hi = bathmod.gamma_t(b, -nu, x - lo)
        g_lo = bathmod.gamma_t(b, -nu, x - hi)
        out += (np.exp(1j * nu * x) * (g_hi - g_lo))[..., None, None] * mat
    return out


def _require_square(p: PulseSpec):
    if p.shaped:
        raise UnsupportedConfiguration("closed-form gate dissipators need an unshaped pulse")
    if p.instantaneous:
        raise UnsupportedConfiguration("closed-form gate dissipators need a finite window")


def gate_integral(m: ModelSpec, b: BathSpec, p: PulseSpec, t):
    """int_{tau_p1}^{min(t, tau_p2)} C(t - tau) U_S(t,tau) A U_S(tau,t) dtau for a square pulse."""
    _require_square(p)
    t = np.asarray(t, dtype=float)
    x = t - p.tau_p1
    if np.any(x < 0):
        raise ValueError("gate integral needs t >= tau_p1")
    hi = np.minimum(x, p.duration)
    inner = _window_sum(b, square_phasors(m, p), x, 0.0, hi)
    u = gate_propagator(m, p, t)
    return conjugate(u, inner)


def lambda_in_gate(m: ModelSpec, b: BathSpec, p: PulseSpec, t, settle_time=None, history="dp"):
    """Lambda for tau_p1 <= t <= tau_p2 during a square pulse."""
    t = np.asarray(t, dtype=float)
    if np.any(t < p.tau_p1 - 1e-12) or np.any(t > p.tau_p2 + 1e-12):
        raise ValueError("lambda_in_gate needs tau_p1 <= t <= tau_p2")
    out = gate_integral(m, b, p, t)
    if history == "dp":
        out = out + pre_gate_term(m, b, p, t, settle_time)
    return out


def lambda_post_pulse(m: ModelSpec, b: BathSpec, p: PulseSpec, t):
    """Memory of the pulse itself, int_{tau_p1}^{tau_p2} C(t - tau) U_S(t,tau) A U_S(tau,t) dtau, t >= tau_p2."""
    t = np.asarray(t, dtype=float)
    if np.any(t < p.tau_p2 - 1e-12):
        raise ValueError("lambda_post_pulse needs t >= tau_p2")
    if p.instantaneous:
        return np.zeros(t.shape + (2, 2), dtype=complex)
    return gate_integral(m, b, p, t)


def lambda_post_gate(m: ModelSpec, b: BathSpec, p: PulseSpec, t, settle_time=None, history="dp"):
    """Full Lambda after the pulse: static since tau_p2 + pulse memory + dressed pre-gate memory."""
    t = np.asarray(t, dtype=float)
    out = lambda_static(m, b, t - p.tau_p2)
    if not p.instantaneous:
        if p.shaped:
            raise UnsupportedConfiguration("post-gate memory of shaped pulses is not implemented")
        out = out + lambda_post_pulse(m, b, p, t)
    if history == "dp":
        out = out + pre_gate_term(m, b, p, t, settle_time)
    return out


def lambda_schedule(m: ModelSpec, b: BathSpec, p: PulseSpec, t, history="dp", settle_time=None):
    """Lambda at absolute times t >= tau_p1 for the chosen pre-gate history.

    ``history``: "dp" keeps the dressed pre-gate memory, "factorized" starts
    the bath fresh at tau_p1, "markov" uses the static Markovian operator throughout.
    """
    if history not in HISTORIES:
        raise ConfigError(f"history must be one of {HISTORIES}, got {history!r}")
    t = np.asarray(t, dtype=float)
    if history == "markov":
        if settle_time is not None:
            return lambda_static(m, b, settle_time + (t - p.tau_p1))
        return np.broadcast_to(lambda_markov(m, b), t.shape + (2, 2)).copy()
    out = np.zeros(t.shape + (2, 2), dtype=complex)
    inside = t < p.tau_p2
    if inside.any():
        if p.shaped:
            out[inside] = lambda_general_pulse(m, b, p, t[inside], settle_time=settle_time, history=history)
        else:
            out[inside] = lambda_in_gate(m, b, p, t[inside], settle_time, history)
    if (~inside).any():
        out[~inside] = lambda_post_gate(m, b, p, t[~inside], settle_time, history)
    return out


# ---------------------------------------------------------------------------
# closed forms as printed in the nine-frequency notation (phi = 0, x-axis pulse)

def _require_printed(m: ModelSpec, p: PulseSpec):
    if m.phi != 0 or m.transverse != 1:
        raise UnsupportedConfiguration("the nine-frequency closed form assumes phi = 0 and unit transverse coupling")
    if p.axis_phase != 0:
        raise UnsupportedConfiguration("the nine-frequency closed form assumes an x-axis pulse")
    _require_square(p)


def lambda_in_gate_nine(m: ModelSpec, b: BathSpec, p: PulseSpec, t, settle_time=None):
    """In-gate Lambda written with sz, s+, s- coefficients in Gamma at nine frequencies.

    Here G(w) = int_0^x exp(+i w u) C(u) du (the gamma_t convention), x = t - tau_p1.
    Independent of the phasor route used by :func:`lambda_in_gate`; kept as a
    cross-check.
    """
    _require_printed(m, p)
    t = np.asarray(t, dtype=float)
    x = t - p.tau_p1
    d, wp, xi = m.delta, p.omega_p, m.xi
    freqs = [s1 * d + s2 * wp for s1 in (-1, 0, 1) for s2 in (-1, 0, 1)]
    tab = _gammas(b, freqs, x)

    def G(w):
        return tab[w]

    ep, em = np.exp(1j * d * x), np.exp(-1j * d * x)
    cz = 0.25 * (xi * (G(wp) + G(-wp))
                 - 0.5 * (ep * (G(-d + wp) - G(-d - wp)) - em * (G(d + wp) - G(d - wp))))
    cp = 0.25 * (G(d) + 0.5 * (G(d + wp) + G(d - wp))
                 + ep ** 2 * (G(-d) - 0.5 * (G(-d + wp) + G(-d - wp)))
                 + xi * ep * (G(wp) - G(-wp)))
    cm = 0.25 * (G(-d) + 0.5 * (G(-d + wp) + G(-d - wp))
                 + em ** 2 * (G(d) - 0.5 * (G(d + wp) + G(d - wp)))
                 - xi * em * (G(wp) - G(-wp)))
    inner = cz[..., None, None] * SZ + cp[..., None, None] * SP + cm[..., None, None] * SM
    return pre_gate_term(m, b, p, t, settle_time) + inner


def pulse_coefficients_nine(m: ModelSpec, b: BathSpec, p: PulseSpec, t):
    """(C_z, C_+, C_-) of the post-gate pulse memory in the nine-frequency notation.

    Uses dG_w = G_w(t - tau_p1) - G_w(t - tau_p2) and Phi = -omega_p (t - tau_p2),
    with the same G convention as :func:`lambda_in_gate_nine`.
    """
    _require_printed(m, p)
    t = np.asarray(t, dtype=float)
    d, wp, xi = m.delta, p.omega_p, m.xi
    x1, x2 = t - p.tau_p1, t - p.tau_p2
    freqs = [s1 * d + s2 * wp for s1 in (-1, 0, 1) for s2 in (-1, 0, 1)]
    g1 = _gammas(b, freqs, x1)
    g2 = _gammas(b, freqs, x2)

    def dG(w):
        return g1[w] - g2[w]

    e = np.exp(-1j * wp * x2)
    ed = np.exp(1j * d * x1)
    cz = (xi / 4 * (e * dG(wp) + dG(-wp) / e)
          + (ed / e * dG(-d - wp) + e / ed * dG(d + wp)) / 8
          - (e * ed * dG(-d + wp) + dG(d - wp) / (e * ed)) / 8)
    cp = ((ed ** 2 * dG(-d) + dG(d)) / 4
          - ed ** 2 / 8 * (e * dG(-d + wp) + dG(-d - wp) / e)
          + (e * dG(d + wp) + dG(d - wp) / e) / 8
          + xi / 4 * ed * (e * dG(wp) - dG(-wp) / e))
    cm = ((dG(d) / ed ** 2 + dG(-d)) / 4
          - 1 / (8 * ed ** 2) * (e * dG(d + wp) + dG(d - wp) / e)
          + (e * dG(-d + wp) + dG(-d - wp) / e) / 8
          + xi / 4 / ed * (dG(-wp) / e - e * dG(wp)))
    return cz, cp, cm


def lambda_post_pulse_nine(m: ModelSpec, b: BathSpec, p: PulseSpec, t):
    cz, cp, cm = pulse_coefficients_nine(m, b, p, t)
    return cz[..., None, None] * SZ + cp[..., None, None] * SP + cm[..., None, None] * SM


# ---------------------------------------------------------------------------
# shaped pulses

_GL8 = np.polynomial.legendre.leggauss(8)


def interaction_coupling(m: ModelSpec, p: PulseSpec, tau):
    """A_I(tau) = U_S(tau)^dagger A U_S(tau) for absolute tau inside the window."""
    u = gate_propagator(m, p, tau)
    a = coupling_operator(m)
    return dagger(u) @ a @ u


def _general_integral_pointwise(m, b, p, t, panel):
    """int_{tau_p1}^{t} C(t - tau) A_I(tau) dtau by composite 8-point Gauss-Legendre."""
    x = t - p.tau_p1
    if x <= 0:
        return np.zeros((2, 2), dtype=complex)
    n = max(1, int(math.ceil(x / panel)))
    edges = np.linspace(0.0, x, n + 1)
    gx, gw = _GL8
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (half[:, None] * (gx + 1) + edges[:-1, None]).ravel()
    weights = (half[:, None] * gw).ravel()
    vals = bathmod.bcf(b, x - nodes)[:, None, None] * interaction_coupling(m, p, p.tau_p1 + nodes)
    return np.tensordot(weights, vals, axes=(0, 0))


def lambda_general_pulse(m: ModelSpec, b: BathSpec, p: PulseSpec, t, settle_time=None,
                         history="dp", rtol=1e-6):
    """In-gate Lambda for a shaped pulse by direct quadrature at each requested time.

    The panel width is min(0.1/wc, tau_p/200, 1/w_max); the estimate is
    accepted when halving the panels changes it by less than ``rtol``
    (relative to the largest entry, with an absolute floor of rtol * C(0)).
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if p.instantaneous:
        raise UnsupportedConfiguration("a shaped pulse needs a finite window")
    if np.any(t < p.tau_p1 - 1e-12) or np.any(t > p.tau_p2 + 1e-12):
        raise ValueError("lambda_general_pulse needs tau_p1 <= t <= tau_p2")
    wmax = m.delta + float(np.max(np.abs(pulse_drive(p, np.linspace(p.tau_p1, p.tau_p2, 2001)))))
    panel = min(0.1 / b.omega_c, p.duration / 200, 1.0 / wmax)
    floor = rtol * abs(complex(bathmod.bcf(b, 0.0)))
    out = np.empty(t.shape + (2, 2), dtype=complex)
    for i, ti in enumerate(t):
        coarse = _general_integral_pointwise(m, b, p, ti, panel)
        fine = _general_integral_pointwise(m, b, p, ti, panel / 2)
        err = np.max(np.abs(fine - coarse))
        if err > max(rtol * np.max(np.abs(fine)), floor):
            raise bathmod.ConvergenceError(
                f"shaped-pulse quadrature not converged at t={ti}: Richardson estimate {err:.3e}")
        out[i] = fine
    u = gate_propagator(m, p, t)
    out = conjugate(u, out)
    if history == "dp":
        out = out + pre_gate_term(m, b, p, t, settle_time)
    return out


_GREGORY = np.array([3 / 8, 7 / 6, 23 / 24])


def _newton_cotes(n):
    w, _ = newton_cotes(n, 1)
    return w


def causal_convolution(kernel, f, h):
    """y_n = int_0^{n h} k(n h - tau) f(tau) dtau on a uniform grid.

    ``kernel`` and ``f`` are sampled at 0, h, 2h, ...; f may carry trailing
    axes.  End-corrected trapezoid (Gregory) weights give fourth-order
    accuracy for n >= 5; the first few points use closed Newton-Cotes rules.
    """
    kernel = np.asarray(kernel)
    f = np.asarray(f)
    npts = f.shape[0]
    fk = f.reshape(npts, -1)
    kk = kernel[:npts, None]
    full = signal.fftconvolve(kk * np.ones((1, fk.shape[1])), fk, axes=0)[:npts]
    y = full.astype(complex)
    n = np.arange(npts)
    big = n >= 5
    for j, w in enumerate(_GREGORY):
        corr = w - 1
        # left end: tau = j h
        y[big] += corr * kernel[n[big] - j, None] * fk[j]
        # right end: tau = (n - j) h
        y[big] += corr * kernel[j] * fk[n[big] - j]
    for k in range(1, min(5, npts)):
        w = _newton_cotes(k)
        y[k] = sum(w[j] * kernel[k - j] * fk[j] for j in range(k + 1))
    y[0] = 0
    return (h * y).reshape(f.shape)


def general_pulse_grid(m: ModelSpec, b: BathSpec, p: PulseSpec, nsteps: int, settle_time=None,
                       history="dp"):
    """Shaped-pulse Lambda on the uniform grid tau_p1 + k tau_p / nsteps, k = 0..nsteps."""
    if p.instantaneous:
        raise UnsupportedConfiguration("a shaped pulse needs a finite window")
    h = p.duration / nsteps
    x = np.arange(nsteps + 1) * h
    t = p.tau_p1 + x
    t[-1] = p.tau_p2
    a_int = interaction_coupling(m, p, t)
    kern = bathmod.bcf(b, x)
    inner = causal_convolution(kern, a_int, h)
    out = conjugate(gate_propagator(m, p, t), inner)
    if history == "dp":
        out = out + pre_gate_term(m, b, p, t, settle_time)
    return t, out


def pauli_decomposition(lam):
    """(c0, cx, cy, cz) with Lambda = c0 I + cx sx + cy sy + cz sz."""
    c0, c = pauli_components(lam)
    return c0, c[..., 0], c[..., 1], c[..., 2]

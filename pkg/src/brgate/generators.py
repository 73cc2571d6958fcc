"""4x4 Bloch-basis dissipative generators.

The generic construction turns any Lambda and coupling operator A into the
real generator acting on (1, nx, ny, nz).  The closed-form matrices below are
written for phi = 0 and unit transverse coupling in terms of
Gamma_w(t) = J_w(t) + i S_w(t) at w in {-delta, 0, delta}; they serve as
regression fixtures against the generic path.
"""
from __future__ import annotations

import numpy as np

from . import bath as bathmod
from . import dissipators as diss
from .operators import (I2, IMAG_TOL, MalformedGenerator, bloch_basis_transform, bloch_superop, conjugate, coupling_operator,
                        free_generator, free_propagator, gate_unitary)
from .specs import BathSpec, ModelSpec, PulseSpec


class UnsupportedGate(ValueError):
    """The closed form was derived for a pi/2 rotation about x only."""


def dissipative_generator(lam, a) -> np.ndarray:
    """Real Bloch-basis generator of rho -> A rho L^+ + L rho A - A L rho - rho L^+ A.

    Accepts stacks of Lambda (..., 2, 2) and a single or stacked A.
    """
    lam = np.asarray(lam, dtype=complex)
    a = np.asarray(a, dtype=complex)
    a = np.broadcast_to(a, lam.shape)
    eye = np.broadcast_to(I2, lam.shape)
    # column-major vec: vec(X rho Y) = (Y^T kron X) vec(rho)
    sup = (_kron(np.conj(lam), a) + _kron(np.conj(a), lam)
           - _kron(eye, a @ lam) - _kron(np.conj(a) @ np.conj(lam), eye))
    g = bloch_basis_transform(sup)
    # trace preservation holds algebraically; clear the rounding residue so the trace is exact
    resid = float(np.max(np.abs(g[..., 0, :]))) if g.size else 0.0
    if resid > IMAG_TOL * max(1.0, float(np.max(np.abs(g)))):
        raise MalformedGenerator(f"dissipative generator does not preserve the trace (row 0 residue {resid:.3e})")
    g[..., 0, :] = 0.0
    return g


def _kron(x, y):
    """Batched Kronecker product of 2x2 stacks."""
    out = x[..., :, None, :, None] * y[..., None, :, None, :]
    return out.reshape(x.shape[:-2] + (4, 4))


def _require_closed_form(m: ModelSpec):
    if m.phi != 0 or m.transverse != 1:
        raise diss.UnsupportedConfiguration("closed-form generators assume phi = 0 and unit transverse coupling")


def spectral_triplet(m: ModelSpec, b: BathSpec, t=None):
    """{w: Gamma_w(t)} for w in (-delta, 0, delta); t=None gives the asymptotic values."""
    out = {}
    for w in (-m.delta, 0.0, m.delta):
        if t is None:
            out[w] = complex(bathmod.spectral_asymptotic(b, w))
        else:
            out[w] = bathmod.gamma_t(b, w, t)
    return out


def _js(gam, d):
    """(J_d, J_-d, J_0, S_d, S_-d, S_0) from a triplet dict."""
    g = [np.asarray(gam[w]) for w in (d, -d, 0.0)]
    return tuple(x.real for x in g) + tuple(x.imag for x in g)


def _stack(rows):
    """4x4 matrices from nested lists of broadcastable arrays."""
    rows = [[np.asarray(v, dtype=float) for v in r] for r in rows]
    shape = np.broadcast_shapes(*[v.shape for r in rows for v in r])
    out = np.zeros(shape + (4, 4))
    for i, r in enumerate(rows):
        for j, v in enumerate(r):
            out[..., i, j] = v
    return out


def static_generator_closed_form(m: ModelSpec, gam) -> np.ndarray:
    """Schrodinger-picture generator of the static Lambda in terms of J and S."""
    _require_closed_form(m)
    xi = m.xi
    jd, jm, j0, sd, sm, s0 = _js(gam, m.delta)
    z = 0 * jd
    return 0.5 * _stack([
        [z, z, z, z],
        [-(jd - jm) * xi, -2 * j0 * xi ** 2, z, (jd + jm) * xi],
        [(sd + sm - 2 * s0) * xi, sm - sd, -2 * j0 * xi ** 2 - jd - jm, (sm - sd) * xi],
        [jd - jm, 2 * j0 * xi, z, -jd - jm],
    ])


def pure_dephasing_generator(m: ModelSpec, b: BathSpec, t) -> np.ndarray:
    """Leading xi^2 part: diag(0, -J_0(t) xi^2, -J_0(t) xi^2, 0)."""
    j0 = np.real(bathmod.gamma_t(b, 0.0, t))
    z = 0 * j0
    return _stack([[z, z, z, z], [z, -j0 * m.xi ** 2, z, z],
                   [z, z, -j0 * m.xi ** 2, z], [z, z, z, z]])


def markov_generator(m: ModelSpec, b: BathSpec) -> np.ndarray:
    return dissipative_generator(diss.lambda_markov(m, b), coupling_operator(m))


def markov_generator_closed_form(m: ModelSpec, b: BathSpec) -> np.ndarray:
    """Markovian zero-temperature generator (J_0 = J_-delta = 0)."""
    _require_closed_form(m)
    if b.temperature != 0:
        raise diss.UnsupportedConfiguration("the reduced Markov form holds at zero temperature")
    jd, _, _, sd, sm, s0 = _js(spectral_triplet(m, b), m.delta)
    xi = m.xi
    return 0.5 * np.array([
        [0, 0, 0, 0],
        [-jd * xi, 0, 0, jd * xi],
        [(sd + sm - 2 * s0) * xi, sm - sd, -jd, (sm - sd) * xi],
        [jd, 0, 0, -jd],
    ])


def markov_rates(m: ModelSpec, b: BathSpec):
    """(1/T1, 1/T2, oscillation frequency) from the eigenvalues of the Markovian generator.

    1/T1 is minus the real eigenvalue of the population block, 1/T2 minus the
    real part of the complex pair.
    """
    g = free_generator(m) + markov_generator(m, b)
    ev = np.linalg.eigvals(g[1:, 1:])
    pair = ev[np.argsort(-np.abs(ev.imag))[:2]]
    real = ev[np.argmin(np.abs(ev.imag))]
    return -real.real, -pair[0].real, abs(pair[0].imag)


def markov_frequency_closed_form(m: ModelSpec, b: BathSpec) -> float:
    """Damped precession frequency sqrt(delta^2 - delta (S_-d - S_d)/2 - J_d^2/16) at T = 0.

    The zero-temperature coherence block does not involve xi, so neither does
    the frequency.
    """
    _require_closed_form(m)
    if b.temperature != 0:
        raise diss.UnsupportedConfiguration("the closed-form frequency holds at zero temperature")
    jd, _, _, sd, sm, _ = _js(spectral_triplet(m, b), m.delta)
    d = m.delta
    return float(np.sqrt(d * d - d * (sm - sd) / 2 - jd ** 2 / 16))


# ---------------------------------------------------------------------------
# instantaneous pi/2 x-gate: explicit decomposition

def _require_half_pi_x(p: PulseSpec):
    if not np.isclose(p.theta, np.pi / 2) or p.axis_phase != 0:
        raise UnsupportedGate("the explicit decomposition is derived for a pi/2 rotation about x")


def _trig(d, t):
    t = np.asarray(t, dtype=float)
    return 0.5 * np.cos(2 * d * t), 0.5 * np.sin(2 * d * t), np.cos(d * t), np.sin(d * t)


def _d1(sign, xi, j, s):
    z = 0 * j
    return 0.25 * _stack([
        [z, z, z, z],
        [sign * xi * j, z, z, -xi * j],
        [-xi * s, sign * s, j, sign * xi * s],
        [-sign * j, z, z, j],
    ])


def _d2(xi, j0, s0):
    z = 0 * j0
    return _stack([
        [z, z, z, z],
        [z, -xi ** 2 * j0, z, z],
        [-xi * s0, z, -xi ** 2 * j0, z],
        [z, xi * j0, z, z],
    ])


def _d3p(xi, j, s, mm, nn, gg, hh):
    z = 0 * j
    return 0.5 * _stack([
        [z, z, z, z],
        [xi * (j * mm + s * nn), xi * (s * gg - j * hh), z, xi * (j * mm + s * nn)],
        [-j * (gg + xi * nn) - s * (hh - xi * mm), s * mm - j * nn,
         -j * (mm + xi * hh) - s * (nn - xi * gg), -xi * (j * nn - s * mm)],
        [-j * mm - s * nn, -s * gg + j * hh, z, -j * mm - s * nn],
    ])


def _d3m(xi, j, s, mm, nn, gg, hh):
    z = 0 * j
    return 0.5 * _stack([
        [z, z, z, z],
        [xi * (-j * mm + s * nn), -xi * (s * gg + j * hh), z, xi * (j * mm - s * nn)],
        [j * (gg + xi * nn) - s * (hh - xi * mm), -s * mm - j * nn,
         -j * (mm + xi * hh) + s * (nn - xi * gg), -xi * (j * nn + s * mm)],
        [j * mm - s * nn, s * gg + j * hh, z, -j * mm + s * nn],
    ])


def _d4(xi, j0, s0, gg, hh):
    z = 0 * j0
    return _stack([
        [z, z, z, z],
        [-xi ** 2 * s0 * gg, z, z, xi ** 2 * j0 * hh],
        [xi ** 2 * s0 * hh, xi * j0 * gg, -xi * j0 * hh, xi ** 2 * j0 * gg],
        [xi * s0 * gg, z, z, -xi * j0 * hh],
    ])


def dp_generator_direct(m: ModelSpec, b: BathSpec, p: PulseSpec, t, settle_time=None) -> np.ndarray:
    """Generic generator of the instantaneous-gate Lambda at elapsed time t."""
    lam = diss.lambda_instant_dp(m, b, p, t, settle_time)
    return dissipative_generator(lam, coupling_operator(m))


def dp_generator_decomposition(m: ModelSpec, b: BathSpec, p: PulseSpec, t):
    """Seven generators summing to the instantaneous pi/2 x-gate generator at elapsed time t.

    Order: asymptotic generator, dD1+, dD1-, D2, dD3-, dD3+, D4.  The
    +-delta terms take dGamma_w(t) = Gamma_w - Gamma_w(t); D2 and D4 take
    Gamma_0(t) - Gamma_0 (just J_0(t) for the dephasing rate at T = 0).
    dD1+- and D2 are constant in the explicit phase, the other three
    oscillate at delta and 2 delta.
    """
    _require_closed_form(m)
    _require_half_pi_x(p)
    t = np.asarray(t, dtype=float)
    d, xi = m.delta, m.xi
    gam = spectral_triplet(m, b, t)
    asym = spectral_triplet(m, b)
    dgam = {w: asym[w] - gam[w] for w in gam}
    jd, jm, j0, sd, sm, s0 = _js(dgam, d)
    mm, nn, gg, hh = _trig(d, t)
    base = np.broadcast_to(static_generator_closed_form(m, asym), t.shape + (4, 4))
    return [
        base.copy(),
        _d1(+1, xi, jd, sd),
        _d1(-1, xi, jm, sm),
        _d2(xi, -j0, -s0),
        _d3m(xi, jm, sm, mm, nn, gg, hh),
        _d3p(xi, jd, sd, mm, nn, gg, hh),
        _d4(xi, -j0, -s0, gg, hh),
    ]


# ---------------------------------------------------------------------------
# interaction picture and coarse graining

_HARMONIC_SAMPLES = 16


def _interaction_lambda(m: ModelSpec, gam, phase):
    """sum_parts coef Gamma_{-nu} exp(i nu t) op with the explicit phase Delta t -> ``phase``."""
    phase = np.asarray(phase, dtype=float)
    lam = np.zeros(np.broadcast_shapes(phase.shape, np.shape(gam[0.0])) + (2, 2), dtype=complex)
    a = np.zeros(phase.shape + (2, 2), dtype=complex)
    for coef, op, nu in diss._coupling_parts(m):
        if coef == 0:
            continue
        rot = np.exp(1j * np.sign(nu) * phase)
        lam = lam + (coef * gam[-nu] * rot)[..., None, None] * op
        a = a + (coef * rot)[..., None, None] * op
    return lam, a


def interaction_generators(m: ModelSpec, b: BathSpec, p: PulseSpec, t, phase=None):
    """(pre-gate, post-gate) interaction-picture generators after an instantaneous gate.

    The pre-gate Lambda is U_c [Lambda^M - Lambda_static](t) U_c^dagger, the
    post-gate one Lambda_static(t), both rotated to the interaction picture.
    ``phase`` overrides the explicit free-evolution phase Delta t while
    keeping the Gamma_w(t) values at time t.
    """
    t = np.asarray(t, dtype=float)
    if phase is None:
        phase = m.delta * t
    gam = spectral_triplet(m, b, t)
    asym = spectral_triplet(m, b)
    dgam = {w: asym[w] - gam[w] for w in gam}
    lam_post, a = _interaction_lambda(m, gam, phase)
    lam_pre, _ = _interaction_lambda(m, dgam, phase)
    lam_pre = conjugate(gate_unitary(p), lam_pre)
    return dissipative_generator(lam_pre, a), dissipative_generator(lam_post, a)


def coarse_grained_generators(m: ModelSpec, b: BathSpec, p: PulseSpec, t):
    """Zero-harmonic part in the explicit phase Delta t of :func:`interaction_generators`.

    Each generator is a trigonometric polynomial of low degree in Delta t
    with slowly varying coefficients Gamma_w(t); averaging over a uniform set
    of phases removes every exp(+-ik Delta t), k >= 1, exactly.
    """
    t = np.asarray(t, dtype=float)
    phases = 2 * np.pi * np.arange(_HARMONIC_SAMPLES) / _HARMONIC_SAMPLES
    pre = np.zeros(t.shape + (4, 4))
    post = np.zeros(t.shape + (4, 4))
    for ph in phases:
        g_pre, g_post = interaction_generators(m, b, p, t, phase=np.full(t.shape, ph))
        pre += g_pre
        post += g_post
    return pre / len(phases), post / len(phases)


def coarse_grained_closed_form(m: ModelSpec, b: BathSpec, t):
    """(pre-gate, post-gate) coarse-grained generators for the pi/2 x-gate in closed form."""
    _require_closed_form(m)
    t = np.asarray(t, dtype=float)
    xi, d = m.xi, m.delta
    gam = spectral_triplet(m, b, t)
    asym = spectral_triplet(m, b)
    jd, jm, j0, sd, sm, s0 = _js(gam, d)
    djd, djm, dj0, dsd, dsm, ds0 = _js({w: asym[w] - gam[w] for w in gam}, d)
    z = 0 * jd
    post = 0.5 * _stack([
        [z, z, z, z],
        [z, -2 * xi ** 2 * j0 - 0.5 * (jd + jm), 0.5 * (sd - sm), z],
        [z, 0.5 * (sm - sd), -2 * xi ** 2 * j0 - 0.5 * (jd + jm), z],
        [jd - jm, z, z, -jm - jd],
    ])
    pre = 0.5 * _stack([
        [z, z, z, z],
        [2 * xi ** 2 * ds0 + 0.5 * (dsm + dsd), z, 0.5 * (dsd - dsm), z],
        [0.5 * (djm - djd), z, -0.5 * (djm + djd), -2 * xi ** 2 * dj0],
        [-0.5 * (djm - djd), 0.5 * (dsm - dsd), 0.5 * (djm + djd), -0.5 * (djm + djd)],
    ])
    return pre, post


def to_interaction(m: ModelSpec, gen_s, t):
    """Interaction-picture form R^T G R of a Schrodinger-picture generator (no free part)."""
    r = _free_rotation(m, t)
    return np.swapaxes(r, -1, -2) @ gen_s @ r


def _free_rotation(m: ModelSpec, t):
    """4x4 Bloch-basis action of exp(-i H0 t) (Schrodinger state = R @ interaction state)."""
    return bloch_superop(free_propagator(m, t))

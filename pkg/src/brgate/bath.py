"""Bath correlation function and time-dependent spectral densities.

The spectral density is J(w) = 2 pi lambda2 w^s wc^(1-s) exp(-w/wc) for w > 0.
Gamma_w(t) = int_0^t exp(i w tau) C(tau) dtau = J_w(t) + i S_w(t) is returned
as a complex number (real part J, imaginary part S) throughout.

At zero temperature Gamma_w(t) has a closed form through the upper incomplete
gamma function,

    Gamma_w(t) = -2i lambda2 wc Gamma(s+1) [G(z1) - exp(i w t) (1 + i wc t)^(-s) G(z2)],
    G(z) = exp(z) z^s Gamma(-s, z),   z1 = -w/wc,   z2 = z1 (1 + i wc t),

with w -> w + i0 on the branch cut.  Near the cut the continued fraction for
Gamma(-s, z) stalls, so short times are integrated directly with Gauss-Legendre
and the tail formula is used only where it converges.  At finite temperature
the thermal part of C(tau) is summed exactly over the poles of the coth kernel.
"""
from __future__ import annotations

from functools import lru_cache
import math

import numpy as np
from scipy import integrate, interpolate, special

from .specs import BathSpec


class ConvergenceError(ArithmeticError):
    """A series, continued fraction or quadrature failed to converge."""


class DivergentLimit(ArithmeticError):
    """A t -> infinity spectral limit does not exist for this bath."""


# ---------------------------------------------------------------------------
# upper incomplete gamma

_CF_TOL = 1e-15
_CF_MAXIT = 5000
_SERIES_MAXTERMS = 400


def _branch_log(z):
    """Principal log with the negative real axis taken from below (arg = -pi)."""
    z = np.asarray(z, dtype=complex)
    arg = np.angle(z)
    arg = np.where((z.imag == 0) & (z.real < 0), -np.pi, arg)
    return np.log(np.abs(z)) + 1j * arg


def _cf_scaled(a, z):
    """exp(z) z^-a Gamma(a, z) by the modified Lentz continued fraction (vectorized)."""
    z = np.asarray(z, dtype=complex)
    tiny = 1e-300
    b = z + 1 - a
    c = np.full(z.shape, 1 / tiny, dtype=complex)
    d = 1 / b
    h = d.copy()
    bb, cc, dd, hh = b.ravel(), c.ravel(), d.ravel(), h.ravel()
    out = np.empty(z.size, dtype=complex)
    live = np.arange(z.size)
    for i in range(1, _CF_MAXIT):
        an = -i * (i - a)
        bb = bb + 2
        dd = an * dd + bb
        dd = np.where(np.abs(dd) < tiny, tiny, dd)
        cc = bb + an / cc
        cc = np.where(np.abs(cc) < tiny, tiny, cc)
        dd = 1 / dd
        de = dd * cc
        hh = hh * de
        done = np.abs(de - 1) < _CF_TOL
        if done.any():
            out[live[done]] = hh[done]
            keep = ~done
            live, bb, cc, dd, hh = live[keep], bb[keep], cc[keep], dd[keep], hh[keep]
            if live.size == 0:
                break
    if live.size:
        raise ConvergenceError(
            f"incomplete gamma continued fraction did not converge for a={a}, "
            f"z={z.ravel()[live[0]]} ({live.size} points)"
        )
    return out.reshape(z.shape)


def _series_scaled(a, z):
    """exp(z) z^-a Gamma(a, z) from the power series of the lower function."""
    z = np.asarray(z, dtype=complex)
    logz = _branch_log(z)
    a_real = np.isreal(a)
    n = int(round(np.real(a))) if a_real else 0
    if a_real and np.real(a) <= 0 and abs(np.real(a) - n) < 1e-12:
        return _series_scaled_nonpositive_int(-n, z, logz)
    # Gamma(a) - sum_k (-1)^k z^(a+k) / (k! (a+k)), scaled by exp(z) z^-a
    total = np.zeros(z.shape, dtype=complex)
    term = np.ones(z.shape, dtype=complex)  # (-z)^k / k!
    for k in range(_SERIES_MAXTERMS):
        if k:
            term = term * (-z) / k
        inc = term / (a + k)
        total += inc
        if k > 4 and np.all(np.abs(inc) <= 1e-17 * np.maximum(np.abs(total), 1e-300)):
            break
    else:
        raise ConvergenceError(f"incomplete gamma series did not converge for a={a}")
    return np.exp(z) * (np.exp(-a * logz) * special.gamma(a) - total)


def _series_scaled_nonpositive_int(n, z, logz):
    """exp(z) z^n Gamma(-n, z) through the exponential integral."""
    total = np.zeros(z.shape, dtype=complex)
    term = np.ones(z.shape, dtype=complex)
    for k in range(1, _SERIES_MAXTERMS):
        term = term * (-z) / k
        inc = term / k
        total += inc
        if k > 4 and np.all(np.abs(inc) <= 1e-17 * np.maximum(np.abs(total), 1e-300)):
            break
    else:
        raise ConvergenceError("exponential integral series did not converge")
    e1 = -np.euler_gamma - logz - total
    # Gamma(-n, z) = (-1)^n / n! [E1(z) - exp(-z) sum_{k<n} (-1)^k k! / z^(k+1)]
    fin = np.zeros(z.shape, dtype=complex)
    for k in range(n):
        fin += (-1) ** k * math.factorial(k) * np.exp(-(k + 1) * logz)
    return (-1) ** n / math.factorial(n) * (np.exp(z + n * logz) * e1 - np.exp(n * logz) * fin)


def upper_gamma_scaled(a, z):
    """exp(z) z^-a Gamma(a, z), vectorized over z.

    Uses the continued fraction for |z| >= 1.5|a| + 4 and the power series
    otherwise.  Points on the negative real axis are taken from below.
    """
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    out = np.empty(z.shape, dtype=complex)
    use_cf = np.abs(z) >= 1.5 * abs(a) + 4
    if use_cf.any():
        out[use_cf] = _cf_scaled(a, z[use_cf])
    if (~use_cf).any():
        out[~use_cf] = _series_scaled(a, z[~use_cf])
    return out[0] if scalar else out


def upper_incomplete_gamma(a, z):
    """Gamma(a, z) = int_z^inf t^(a-1) exp(-t) dt on the principal branch."""
    z = np.asarray(z, dtype=complex)
    return np.exp(a * _branch_log(z) - z) * upper_gamma_scaled(a, z)


# ---------------------------------------------------------------------------
# spectral density and correlation function

def spectral_density(b: BathSpec, omega):
    """Zero-temperature J(w); zero for w <= 0."""
    w = np.asarray(omega, dtype=float)
    pos = np.where(w > 0, w, 1.0)
    val = 2 * np.pi * b.lambda2 * pos ** b.s * b.omega_c ** (1 - b.s) * np.exp(-pos / b.omega_c)
    return np.where(w > 0, val, 0.0)


def thermal_spectral_density(b: BathSpec, omega):
    """Asymptotic rate J_w at temperature T: J(w)(n+1) for w > 0, J(|w|) n for w < 0."""
    w = np.asarray(omega, dtype=float)
    if b.temperature == 0:
        return spectral_density(b, w)
    aw = np.abs(w)
    safe = np.where(aw > 0, aw, 1.0)
    occ = 1 / np.expm1(safe / b.temperature)
    jw = spectral_density(b, safe)
    val = np.where(w > 0, jw * (occ + 1), jw * occ)
    if b.s > 1:
        zero = 0.0
    elif b.s == 1:
        zero = 2 * np.pi * b.lambda2 * b.temperature
    else:
        zero = np.inf
    return np.where(aw > 0, val, zero)


def _prefactor(b: BathSpec) -> float:
    """2 lambda2 wc^(1-s) Gamma(s+1): C0(tau) = pref (1/wc + i tau)^(-s-1)."""
    return 2 * b.lambda2 * b.omega_c ** (1 - b.s) * special.gamma(b.s + 1)


def bcf_zero_temperature(b: BathSpec, tau):
    tau = np.asarray(tau, dtype=float)
    return 2 * b.lambda2 * b.omega_c ** 2 * special.gamma(b.s + 1) * (1 + 1j * b.omega_c * tau) ** (-b.s - 1)


_IMAGES = 24


def thermal_bcf_correction(b: BathSpec, tau):
    """C_T(tau) - C_0(tau), a real even function, from the poles of coth(beta w / 2).

    C_T - C_0 = sum_{n>=1} A [(1/wc + n beta + i tau)^(-s-1) + c.c.]; the terms
    beyond ``_IMAGES`` are summed with the Euler-Maclaurin midpoint formula.
    """
    tau = np.abs(np.asarray(tau, dtype=float))
    if b.temperature == 0 or b.lambda2 == 0:
        return np.zeros(tau.shape)
    temp, s, amp = b.temperature, b.s, _prefactor(b)
    # in units of beta: (c + n beta)^(-s-1) = T^(s+1) (c T + n)^(-s-1), finite for any T > 0
    u = (1 / b.omega_c + 1j * tau) * temp
    total = np.zeros(tau.shape, dtype=complex)
    for n in range(1, _IMAGES + 1):
        total += (u + n) ** (-s - 1)
    w = u + _IMAGES + 0.5
    # int_{N+1/2}^inf f + f'/24 - 7 f'''/5760 for f(x) = (u + x)^(-s-1)
    total += w ** (-s) / s
    total -= (s + 1) * w ** (-s - 2) / 24
    total += 7 * (s + 1) * (s + 2) * (s + 3) * w ** (-s - 4) / 5760
    total *= temp ** (s + 1)
    return 2 * amp * total.real


def bcf(b: BathSpec, tau):
    """C(tau) at the bath temperature (vectorized); C(-tau) = conj(C(tau))."""
    tau = np.asarray(tau, dtype=float)
    out = bcf_zero_temperature(b, tau)
    if b.temperature > 0:
        out = out + thermal_bcf_correction(b, tau)
    return out


def bcf_quadrature(b: BathSpec, tau, rtol=1e-10):
    """C(tau) by adaptive quadrature of its spectral representation (reference path).

    The frequency integral is split at w = 20/beta so the coth kernel's
    low-frequency structure sits in its own interval.
    """
    tau = float(tau)
    if b.lambda2 == 0:
        return 0j
    beta = b.beta
    wmax = b.omega_c * (60 + 4 * b.s)

    def coth_part(w):
        if w == 0:
            return 0.0
        jw = spectral_density(b, w)
        kern = 1.0 if math.isinf(beta) else 1 / math.tanh(beta * w / 2)
        return float(jw * kern) * math.cos(w * tau)

    def sin_part(w):
        return float(spectral_density(b, w)) * math.sin(w * tau)

    split = [0.0, wmax] if math.isinf(beta) else sorted({0.0, min(20 / beta, wmax), wmax})
    re = im = 0.0
    for lo, hi in zip(split[:-1], split[1:]):
        for fn, sign in ((coth_part, 1), (sin_part, -1)):
            val, err = integrate.quad(fn, lo, hi, limit=2000, epsabs=0, epsrel=rtol)
            if not np.isfinite(val) or err > 1e-6 * max(abs(val), 1e-12 * b.lambda2):
                raise ConvergenceError(
                    f"bath correlation quadrature failed at tau={tau}: "
                    f"interval [{lo}, {hi}], value {val}, error estimate {err}"
                )
            if sign > 0:
                re += val
            else:
                im -= val
    return (re + 1j * im) / np.pi


# ---------------------------------------------------------------------------
# zero-temperature Gamma_w(t)

_GL48 = np.polynomial.legendre.leggauss(48)
_CUT_ANGLE = 0.3      # continued fraction trusted at least this far from the cut
_FAR = 50.0           # ... or beyond this |z|, where it converges even on the cut


def _gl_from_zero(b: BathSpec, omega: float, t):
    """int_0^t exp(i w tau) C0(tau) dtau by one 48-point Gauss-Legendre panel."""
    t = np.asarray(t, dtype=float)
    x, w = _GL48
    nodes = 0.5 * t[:, None] * (x + 1)
    vals = np.exp(1j * omega * nodes) * bcf_zero_temperature(b, nodes)
    return 0.5 * t * (vals @ w)


def _switch_time(b: BathSpec, omega: float) -> float:
    """Below this elapsed time the tail formula would hug the branch cut."""
    x = omega / b.omega_c
    if x > 0 and x < _FAR:
        return math.tan(_CUT_ANGLE) / b.omega_c
    return 0.0


def _tail_factor(b: BathSpec, omega: float, t):
    """exp(i w t) (1 + i wc t)^-s G(z2); Gamma_w(t) = K [G(z1) - tail]."""
    t = np.asarray(t, dtype=float)
    x = omega / b.omega_c
    z2 = -x * (1 + 1j * b.omega_c * t)
    return np.exp(1j * omega * t) * (1 + 1j * b.omega_c * t) ** (-b.s) * upper_gamma_scaled(-b.s, z2)


def _k(b: BathSpec) -> complex:
    return -2j * b.lambda2 * b.omega_c * special.gamma(b.s + 1)


@lru_cache(maxsize=4096)
def _zero_t_asymptote(b: BathSpec, omega: float) -> complex:
    if b.lambda2 == 0:
        return 0j
    if omega == 0:
        return -2j * b.lambda2 * b.omega_c * special.gamma(b.s)
    x = omega / b.omega_c
    if x < 0:
        return complex(_k(b) * upper_gamma_scaled(-b.s, complex(-x, 0.0)))
    if x >= _FAR:
        # the continued fraction is real on the cut; the absorptive part is
        # exponentially small there but is restored exactly
        shift = (_k(b) * upper_gamma_scaled(-b.s, complex(-x, 0.0))).imag
        return complex(float(spectral_density(b, omega)), shift)
    ts = _switch_time(b, omega)
    head = _gl_from_zero(b, omega, np.array([ts]))[0]
    return complex(head + _k(b) * _tail_factor(b, omega, ts))


def _gamma_zero_t(b: BathSpec, omega: float, t):
    t = np.asarray(t, dtype=float)
    if b.lambda2 == 0:
        return np.zeros(t.shape, dtype=complex)
    if omega == 0:
        return -2j * b.lambda2 * b.omega_c * special.gamma(b.s) * (1 - (1 + 1j * b.omega_c * t) ** (-b.s))
    out = np.empty(t.shape, dtype=complex)
    ts = _switch_time(b, omega)
    short = t <= ts
    if short.any():
        out[short] = _gl_from_zero(b, omega, t[short])
    if (~short).any():
        asym = _zero_t_asymptote(b, omega)
        out[~short] = asym - _k(b) * _tail_factor(b, omega, t[~short])
    out[t == 0] = 0
    return out


# ---------------------------------------------------------------------------
# finite temperature: exact zero-T part plus the integrated thermal correction

_GL8 = np.polynomial.legendre.leggauss(8)


class _ThermalCorrection:
    """Cubic-spline table of the thermal BCF correction, grown on demand."""

    def __init__(self, b: BathSpec):
        self.bath = b
        self.scale = 1 / b.omega_c + b.beta     # distance of the nearest pole
        self.step = self.scale / 64
        self.span = 0.0
        self.spline = None

    def ensure(self, tmax: float):
        if self.spline is not None and tmax <= self.span:
            return
        span = max(tmax, 2 * self.span, 64 * self.scale)
        n = int(math.ceil(span / self.step)) + 4
        grid = np.arange(n + 1) * self.step
        vals = thermal_bcf_correction(self.bath, grid)
        self.spline = interpolate.CubicSpline(grid, vals, bc_type=((1, 0.0), "not-a-knot"))
        self.span = grid[-2]

    def __call__(self, tau):
        tau = np.abs(np.asarray(tau, dtype=float))
        self.ensure(float(tau.max(initial=0.0)))
        return self.spline(tau)

    def integral(self, omega: float, t):
        """int_0^t exp(i w tau) dC(tau) dtau for every entry of t (any order)."""
        t = np.asarray(t, dtype=float)
        flat = t.ravel()
        if flat.size == 0:
            return np.zeros(t.shape, dtype=complex)
        tmax = float(flat.max())
        self.ensure(tmax)
        width = self.scale / 4
        if omega != 0:
            width = min(width, 1.0 / abs(omega))
        npanel = max(1, int(math.ceil(tmax / width)))
        edges = np.union1d(np.linspace(0.0, tmax, npanel + 1), flat)
        lo, hi = edges[:-1], edges[1:]
        x, w = _GL8
        nodes = 0.5 * (hi - lo)[:, None] * (x + 1) + lo[:, None]
        vals = np.exp(1j * omega * nodes) * self.spline(nodes)
        panel = 0.5 * (hi - lo) * (vals @ w)
        cum = np.concatenate([[0.0], np.cumsum(panel)])
        pos = np.searchsorted(edges, flat)
        return cum[pos].reshape(t.shape)


@lru_cache(maxsize=64)
def _thermal(b: BathSpec) -> _ThermalCorrection:
    return _ThermalCorrection(b)


def _principal_value_shift(b: BathSpec, omega: float) -> float:
    """S_w at temperature T by principal-value quadrature of the spectral representation."""
    if b.lambda2 == 0:
        return 0.0
    T = b.temperature
    wmax = b.omega_c * (60 + 4 * b.s) + 4 * abs(omega)

    def occ(nu):
        if T == 0 or nu == 0 or nu > 700 * T:
            return 0.0
        return 1 / math.expm1(nu / T)

    if omega == 0:
        return -2 * b.lambda2 * b.omega_c * float(special.gamma(b.s))

    pole = abs(omega)
    # singular piece: f(nu) / (nu - pole)
    if omega > 0:
        def sing(nu):
            return -float(spectral_density(b, nu)) * (occ(nu) + 1)

        def reg(nu):
            return float(spectral_density(b, nu)) * occ(nu) / (omega + nu)
    else:
        def sing(nu):
            return float(spectral_density(b, nu)) * occ(nu)

        def reg(nu):
            return float(spectral_density(b, nu)) * (occ(nu) + 1) / (omega - nu)

    total = 0.0
    a_hi = 2 * pole
    val, err = integrate.quad(sing, 0.0, a_hi, weight="cauchy", wvar=pole, limit=2000, epsabs=0, epsrel=1e-12)
    total += val
    for lo, hi in ((a_hi, wmax),):
        val, err = integrate.quad(lambda nu: sing(nu) / (nu - pole), lo, hi, limit=2000, epsabs=0, epsrel=1e-12)
        total += val
    brk = sorted({0.0, min(20 * T, wmax), wmax}) if T > 0 else [0.0, wmax]
    for lo, hi in zip(brk[:-1], brk[1:]):
        val, err = integrate.quad(reg, lo, hi, limit=2000, epsabs=0, epsrel=1e-12)
        total += val
    return total / np.pi


DEFAULT_HORIZON = 1e3  # in units of 1/omega_c


@lru_cache(maxsize=4096)
def _thermal_asymptote(b: BathSpec, omega: float) -> complex:
    j = float(thermal_spectral_density(b, omega))
    if not math.isfinite(j):
        raise DivergentLimit(
            f"J_0 diverges as t -> infinity for s={b.s} < 1 at T={b.temperature}; "
            "a finite settling time is required"
        )
    return complex(j, _principal_value_shift(b, omega))


def spectral_asymptotic(b: BathSpec, omega: float) -> complex:
    """lim_{t->inf} Gamma_w(t) = J_w + i S_w."""
    omega = float(omega)
    if b.temperature == 0:
        return _zero_t_asymptote(b, omega)
    return _thermal_asymptote(b, omega)


def gamma_t(b: BathSpec, omega: float, t):
    """Gamma_w(t) = int_0^t exp(i w tau) C(tau) dtau, vectorized over t >= 0."""
    omega = float(omega)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("gamma_t needs t >= 0")
    out = _gamma_zero_t(b, omega, t)
    if b.temperature > 0 and b.lambda2 > 0:
        out = out + _thermal(b).integral(omega, t)
    return out


def delta_gamma(b: BathSpec, omega: float, t1, t2):
    """Gamma_w(t1) - Gamma_w(t2)."""
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    if np.any(t1 < t2):
        raise ValueError("delta_gamma needs t1 >= t2")
    both = gamma_t(b, omega, np.concatenate([np.ravel(t1), np.ravel(t2)]))
    n = np.size(t1)
    return (both[:n] - both[n:]).reshape(np.broadcast(t1, t2).shape)


def gamma_quadrature(b: BathSpec, omega: float, t: float, rtol=1e-11) -> complex:
    """Reference value of Gamma_w(t) by adaptive quadrature of the closed-form C(tau)."""
    if t == 0:
        return 0j

    def f(tau):
        return complex(np.exp(1j * omega * tau) * bcf(b, tau))

    pts = np.linspace(0, t, max(2, int(t * max(1.0, abs(omega)) / 2) + 1))
    re = im = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        r, _ = integrate.quad(lambda x: f(x).real, lo, hi, epsabs=0, epsrel=rtol, limit=500)
        i, _ = integrate.quad(lambda x: f(x).imag, lo, hi, epsabs=0, epsrel=rtol, limit=500)
        re += r
        im += i
    return complex(re, im)


def bath_table(b: BathSpec, omegas, times):
    """Rows (t, omega, J, S) over the product of frequencies and times."""
    times = np.asarray(times, dtype=float)
    rows = []
    for w in omegas:
        g = gamma_t(b, w, times)
        rows.extend(zip(times, np.full(times.shape, float(w)), g.real, g.imag))
    return rows

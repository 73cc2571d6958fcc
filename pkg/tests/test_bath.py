import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from brgate import bath as B
from brgate.specs import BathSpec

OHMIC = BathSpec(0.02, 1.0, 1.0, 0.0)


def gamma_mp(omega, t, b):
    """Reference Gamma_w(t) by mpmath quadrature of the zero-temperature closed-form C(tau)."""
    mp.mp.dps = 30
    amp = 2 * b.lambda2 * b.omega_c ** 2 * mp.gamma(b.s + 1)
    f = lambda x: mp.exp(1j * omega * x) * amp * (1 + 1j * b.omega_c * x) ** (-b.s - 1)
    return complex(mp.quad(f, mp.linspace(0, t, max(2, int(t) + 2))))


# --- incomplete gamma --------------------------------------------------------

def test_upper_incomplete_gamma_examples():
    assert B.upper_incomplete_gamma(1.0, 1.0) == pytest.approx(math.exp(-1), rel=1e-14)
    ref = float(mp.quad(lambda x: x ** -0.5 * mp.exp(-x), [0.25, mp.inf]))
    assert B.upper_incomplete_gamma(0.5, 0.25) == pytest.approx(ref, rel=1e-12)


@given(st.floats(-2.5, 2.5), st.floats(0.05, 40), st.floats(-3.0, 3.0))
def test_upper_incomplete_gamma_matches_mpmath(a, r, arg):
    z = r * np.exp(1j * arg)
    if abs(a - round(a)) < 1e-3 and round(a) <= 0:
        a += 0.01
    got = complex(B.upper_incomplete_gamma(a, z))
    ref = complex(mp.gammainc(a, z))
    assert abs(got - ref) <= 1e-9 * max(1.0, abs(ref))


@pytest.mark.parametrize("a,z", [(-0.5, 1 - 3j), (-0.1, 0.2 + 0.1j), (0.3, 12 - 5j), (-0.9, 60 + 1j)])
def test_incomplete_gamma_recurrence(a, z):
    lhs = complex(B.upper_incomplete_gamma(a + 1, z))
    rhs = a * complex(B.upper_incomplete_gamma(a, z)) + z ** a * np.exp(-z)
    assert abs(lhs - rhs) < 1e-10 * abs(lhs)


# --- spectral density and correlation function -------------------------------

def test_spectral_density_examples():
    assert B.spectral_asymptotic(OHMIC, 1.0).real == pytest.approx(2 * math.pi * 0.02 * math.exp(-1), rel=1e-10)
    assert B.spectral_asymptotic(OHMIC, -1.0).real == 0
    j = B.spectral_asymptotic(BathSpec(0.002), 1.0).real
    assert 4 / j == pytest.approx(865, rel=1e-3)


def test_bcf_examples():
    assert complex(B.bcf(OHMIC, 0.0)) == pytest.approx(0.04)
    assert complex(B.bcf(OHMIC, 1.0)) == pytest.approx(-0.02j)
    tau = np.array([100.0, 1000.0])
    c = np.abs(B.bcf(OHMIC, tau))
    assert math.log(c[1] / c[0]) / math.log(10) == pytest.approx(-2, abs=0.01)


@pytest.mark.parametrize("b", [OHMIC, BathSpec(0.02, 0.5, 1.0, 0.1), BathSpec(0.01, 1.0, 2.0, 0.5),
                               BathSpec(0.25, 0.8, 0.4, 0.834)])
@pytest.mark.parametrize("tau", [0.0, 0.3, 2.5, 20.0])
def test_bcf_matches_spectral_quadrature(b, tau):
    assert abs(complex(B.bcf(b, tau)) - B.bcf_quadrature(b, tau)) < 1e-7 * abs(complex(B.bcf(b, 0.0)))


@given(st.floats(0.1, 3), st.floats(0, 2), st.floats(0, 50))
def test_bcf_hermitian_symmetry(s, temp, tau):
    b = BathSpec(0.02, s, 1.0, temp)
    assert complex(B.bcf(b, -tau)) == pytest.approx(np.conj(complex(B.bcf(b, tau))), rel=1e-13, abs=1e-16)


def test_thermal_bcf_matches_mpmath():
    b = BathSpec(0.02, 0.5, 1.0, 0.3)
    mp.mp.dps = 25
    for tau in (0.0, 1.0, 7.0):
        f = lambda w: (2 * mp.pi * b.lambda2 * w ** b.s * mp.exp(-w)
                       * (mp.coth(w / (2 * b.temperature)) * mp.cos(w * tau) - 1j * mp.sin(w * tau)))
        ref = complex(mp.quad(f, [0, 0.5, 5, 20, 80])) / math.pi
        assert abs(complex(B.bcf(b, tau)) - ref) < 1e-9


# --- Gamma_w(t) --------------------------------------------------------------

def test_gamma_examples():
    assert B.gamma_t(OHMIC, 0.7, np.array([0.0]))[0] == 0
    assert B.spectral_asymptotic(OHMIC, 0.0).imag == pytest.approx(-2 * 0.02, rel=1e-10)
    ref = gamma_mp(1.0, 5.0, OHMIC)
    assert abs(complex(B.gamma_t(OHMIC, 1.0, 5.0)) - ref) < 1e-10 * abs(ref)


def test_gamma_zero_frequency_closed_form():
    for s in (0.3, 1.0, 2.0):
        b = BathSpec(0.02, s, 1.5, 0.0)
        t = np.array([0.1, 3.0, 40.0])
        exact = -2j * b.lambda2 * b.omega_c * math.gamma(s) * (1 - (1 + 1j * b.omega_c * t) ** (-s))
        assert np.allclose(B.gamma_t(b, 0.0, t), exact, rtol=1e-10)


@pytest.mark.parametrize("s", [0.1, 0.5, 1.0, 3.0])
def test_gamma_matches_mpmath_across_frequencies(s):
    b = BathSpec(0.02, s, 1.0, 0.0)
    for w in (-2.5, -1.0, -0.5, 0.5, 1.0, 1.5, 2.5):
        for t in (0.2, 3.0, 30.0):
            ref = gamma_mp(w, t, b)
            assert abs(complex(B.gamma_t(b, w, t)) - ref) < 1e-8 * abs(ref), (w, t)


def test_gamma_reaches_asymptote():
    for w in (-1.0, 0.0, 1.0, 2.0):
        far = complex(B.gamma_t(OHMIC, w, 1e5))
        assert abs(far - B.spectral_asymptotic(OHMIC, w)) < 1e-6


@pytest.mark.parametrize("s", [0.5, 1.0, 2.0])
def test_late_time_decay_exponents(s):
    b = BathSpec(0.02, s, 1.0, 0.0)
    t = np.geomspace(50, 500, 12)
    # J_0(t) - J_0 ~ sin(s pi / 2) t^-s, so even integer s drops to the next order
    zero_freq = -s if s % 2 else -(s + 1)
    for w, expect in ((1.0, -(1 + s)), (0.0, zero_freq)):
        dev = np.abs(B.gamma_t(b, w, t).real - B.spectral_asymptotic(b, w).real)
        if w != 0:
            # the real part oscillates around its limit; fit the envelope through |Gamma(t) - Gamma|
            dev = np.abs(B.gamma_t(b, w, t) - B.spectral_asymptotic(b, w))
        slope = np.polyfit(np.log(t), np.log(dev), 1)[0]
        assert slope == pytest.approx(expect, abs=0.1)


def test_delta_gamma_examples():
    t = np.array([0.5, 4.0])
    assert np.all(B.delta_gamma(OHMIC, 1.0, t, t) == 0)
    assert np.allclose(B.delta_gamma(OHMIC, 1.0, t, 0 * t), B.gamma_t(OHMIC, 1.0, t))
    assert abs(B.delta_gamma(OHMIC, 1.0, 1e3 + 5, 1e3)) < 1e-5
    with pytest.raises(ValueError):
        B.delta_gamma(OHMIC, 1.0, 1.0, 2.0)


def test_finite_temperature_gamma_matches_quadrature():
    b = BathSpec(0.02, 1.0, 1.0, 0.2)
    for w in (-1.0, 0.0, 1.0):
        for t in (0.5, 10.0, 60.0):
            assert abs(complex(B.gamma_t(b, w, t)) - B.gamma_quadrature(b, w, t)) < 1e-7


def test_detailed_balance():
    for temp in (0.1, 0.5, 2.0):
        b = BathSpec(0.02, 1.0, 1.0, temp)
        for w in (0.5, 1.0, 2.0):
            ratio = B.spectral_asymptotic(b, -w).real / B.spectral_asymptotic(b, w).real
            assert ratio == pytest.approx(math.exp(-w / temp), rel=1e-10)


def test_subohmic_finite_temperature_limit_diverges():
    with pytest.raises(B.DivergentLimit):
        B.spectral_asymptotic(BathSpec(0.02, 0.5, 1.0, 0.1), 0.0)


def test_bath_table_rows():
    rows = B.bath_table(OHMIC, [-1.0, 1.0], [0.0, 1.0])
    assert len(rows) == 4 and rows[0][:2] == (0.0, -1.0)

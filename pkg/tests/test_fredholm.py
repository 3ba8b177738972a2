import math

import mpmath
import numpy as np
import pytest

from geodensity.fredholm import (
    D_DIRECTIONS,
    _logdet_jet,
    _series_exp,
    apply_D_from_jets,
    log1p_complex,
    prefactor_series,
    series_mul,
)


def test_log1p_complex_keeps_tiny_real_parts():
    for w in (1e-20 + 1e-12j, -3e-17 + 2e-9j, 0.3 - 0.4j, -0.9 + 1e-3j, 1e-40 + 0j):
        with mpmath.workdps(400):
            ref = mpmath.log(1 + mpmath.mpc(w.real, w.imag))
        got = complex(log1p_complex(w))
        assert abs(got.real - float(ref.real)) <= 2e-15 * abs(float(ref.real))
        assert abs(got.imag - float(ref.imag)) <= 2e-15 * abs(float(ref.imag))


def test_log1p_complex_at_minus_one():
    assert complex(log1p_complex(-1.0)).real == -math.inf


def test_series_helpers():
    a = np.array([1.0, 2.0, 3.0])
    b = np.array([4.0, 0.0, 1.0])
    assert np.allclose(series_mul(a, b), [4.0, 8.0, 13.0])
    # exp of the series s is Σ s^k / k!
    assert np.allclose(_series_exp(np.array([0.0, 1.0, 0.0, 0.0, 0.0])), [1, 1, 1 / 2, 1 / 6, 1 / 24])
    assert np.allclose(prefactor_series(math.log(3.0), 2.0, 3), [3.0, 6.0, 6.0, 4.0])


def test_apply_D_from_jets_on_polynomial():
    # F = h^4 + x^2 + h t at the origin: D F = 2 + 1/2 + 1
    def taylor(d, order):
        # Taylor coefficients of F(s d) in s, batched over one sample
        c = np.zeros((1, order + 1))
        c[0, 2] = d.dx**2 + d.dh * d.dt
        if order >= 4:
            c[0, 4] = d.dh**4
        return c

    jets = [taylor(d, d.order) for d in D_DIRECTIONS]
    assert apply_D_from_jets(jets)[0] == pytest.approx(3.5)


def test_logdet_jet_matches_contour_taylor_coefficients():
    rng = np.random.default_rng(4)
    n = 6
    O = 0.2 * (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    lam = rng.normal(size=n) + 1j * rng.normal(size=n)
    G = O @ np.linalg.inv(np.eye(n) + O)
    got = _logdet_jet(G, lam, 4)

    m, r = 32, 0.1
    s = r * np.exp(2j * math.pi * np.arange(m) / m)
    base = np.linalg.slogdet(np.eye(n) + O)
    vals = []
    for si in s:
        sign, ld = np.linalg.slogdet(np.eye(n) + np.exp(si * lam)[:, None] * O)
        vals.append(ld - base[1] + np.log(sign / base[0]))
    coeffs = np.fft.fft(vals) / m / r ** np.arange(m)
    assert np.allclose(got, coeffs[:5], rtol=1e-10, atol=1e-12)

import cmath

import numpy as np
import pytest

from geodensity.errors import InvalidArgument, SingularityError
from geodensity.kernels import cauchy_det, cauchy_det_batch, h_poly, h_poly_batch, log_f, s_k, vec_concat


def brute_cauchy(w, wp):
    w, wp = np.asarray(w, dtype=complex), np.asarray(wp, dtype=complex)
    return np.linalg.det(1.0 / (w[:, None] - wp[None, :]))


def test_vec_concat_examples():
    assert vec_concat((1, 2), (-1,)) == (1, 2, -1)
    assert vec_concat((1j, 2), ()) == (1j, 2)
    a, b = (1, 2, 3), (4, 5)
    assert len(vec_concat(a, b)) == len(a) + len(b)


def test_cauchy_small_cases():
    assert cauchy_det((2.0,), (0.5,)) == pytest.approx(1.0 / 1.5)
    assert cauchy_det((0, 2), (1, 3)) == pytest.approx(4.0 / 3.0, rel=1e-14)
    assert cauchy_det((), ()) == 1.0


def test_cauchy_matches_brute_force():
    rng = np.random.default_rng(7)
    for _ in range(200):
        n = int(rng.integers(1, 7))
        w = rng.normal(size=n) + 1j * rng.normal(size=n)
        wp = rng.normal(size=n) + 1j * rng.normal(size=n)
        ref = brute_cauchy(w, wp)
        assert abs(cauchy_det(w, wp) - ref) <= 1e-10 * abs(ref)


def test_cauchy_antisymmetric_under_swap():
    w, wp = (0.3 + 1j, -1.2, 2.5j), (1.1, -0.4 - 0.2j, 3.0)
    swapped = (w[1], w[0], w[2])
    assert cauchy_det(swapped, wp) == pytest.approx(-cauchy_det(w, wp), rel=1e-13)


def test_cauchy_log_range_fallback():
    # factors of 1e-200 and 1e200 leave the direct product range
    w = (0.0, 1e-200)
    wp = (1e200, -1e200)
    ref = (-1.0) * (w[0] - w[1]) * (wp[0] - wp[1])
    for a in w:
        for b in wp:
            ref /= a - b
    val = cauchy_det(w, wp)
    assert abs(val - ref) <= 1e-12 * abs(ref)
    assert cmath.isfinite(val)


def test_cauchy_errors():
    with pytest.raises(InvalidArgument):
        cauchy_det((1, 2), (3,))
    with pytest.raises(SingularityError):
        cauchy_det((1.0, 2.0), (2.0, 5.0))
    with pytest.raises(InvalidArgument):
        cauchy_det_batch(np.zeros((3, 2)), np.ones((3, 1)))


def test_cauchy_batch_agrees_with_scalar():
    rng = np.random.default_rng(3)
    W = rng.normal(size=(10, 3)) + 1j * rng.normal(size=(10, 3))
    Wp = rng.normal(size=(10, 3)) + 1j * rng.normal(size=(10, 3))
    batch = cauchy_det_batch(W, Wp)
    for i in range(10):
        assert batch[i] == pytest.approx(cauchy_det(W[i], Wp[i]), rel=1e-12)


def test_power_sums():
    assert s_k((1, 2), (3,), 1) == 0
    assert s_k((1, 2), (3,), 2) == -4
    assert s_k((-1,), (1,), 3) == -2
    for k in (0, 4):
        with pytest.raises(InvalidArgument):
            s_k((1,), (2,), k)


def test_h_poly_example():
    assert h_poly((-0.5, 1.0), (0.5, -1.0)) == pytest.approx(-0.5, abs=1e-15)


def test_h_identities_random():
    rng = np.random.default_rng(11)
    for _ in range(100):
        u = complex(*rng.uniform(-1, 1, 2))
        v = complex(*rng.uniform(-1, 1, 2))
        assert abs(h_poly((u, 1.0), (v, -1.0)) - 2 * (1 - v) * (1 + u) * (u - v)) < 1e-12
        assert abs(h_poly((u, -1.0, 1.0), (v, 1.0, -1.0))) < 1e-12
        assert abs(h_poly((u,), (v,))) < 1e-12


def test_h_poly_permutation_invariant_and_sums_antisymmetric():
    w, wp = (0.2, -1.5j, 0.7), (1.0 + 1j, 0.1, -0.3)
    assert h_poly(w[::-1], (wp[1], wp[2], wp[0])) == pytest.approx(h_poly(w, wp), rel=1e-13)
    for k in (1, 2, 3):
        assert s_k(w, wp, k) == pytest.approx(-s_k(wp, w, k), rel=1e-13)


def test_h_poly_batch_shift_matches_appended_entries():
    rng = np.random.default_rng(5)
    U = rng.normal(size=(6, 2)) + 1j * rng.normal(size=(6, 2))
    V = rng.normal(size=(6, 2)) + 1j * rng.normal(size=(6, 2))
    shifted = h_poly_batch(U, V, shift=(2.0, 0.0, 2.0))
    for i in range(6):
        assert shifted[i] == pytest.approx(h_poly(tuple(U[i]) + (1.0,), tuple(V[i]) + (-1.0,)), rel=1e-12)


def test_log_f_examples():
    assert log_f(0, 0, 3, 1) == pytest.approx(-1.0)
    assert log_f(0.4, -1.2, 2.0, 0) == 0
    rng = np.random.default_rng(2)
    for _ in range(20):
        h, x, t = rng.normal(size=3)
        w = complex(*rng.normal(size=2))
        assert abs(log_f(h, x, t, w) + log_f(-h, -x, -t, w)) < 1e-12

import math

import numpy as np
import pytest

from geodensity import asymptotics as asy
from geodensity import prelimit as pre
from geodensity.errors import InvalidArgument
from geodensity.quadrature import SampledContour, integrate_tensor

SMALL = pre.PrelimitContours(nodes_per_leg=16)
PT = pre.PrelimitPoint(0.4, 0.9, 0.3, 0.5)
Z = 0.4 * np.exp(0.7j)


def mixed(c_in: SampledContour, c_out: SampledContour, z: complex) -> SampledContour:
    """(1/(1-z)) ∫_in - (z/(1-z)) ∫_out as one weighted node set."""
    return SampledContour(
        np.concatenate((c_in.points, c_out.points)),
        np.concatenate((c_in.weights / (1 - z), -z * c_out.weights / (1 - z))),
    )


def brute_T11(pt, contours, z, with_h=True):
    sc = pre.sample_contours(pt, contours)

    def g(xi, eta, xp, ep):
        val = np.exp(pre.log_f1(pt, xi) - pre.log_f1(pt, eta) + pre.log_f2(pt, xp) - pre.log_f2(pt, ep))
        # C(η';ξ') C(ξ'⊔η; η'⊔ξ) C(ξ;η) written out for n = n' = 1
        c2 = ((xp - eta) * (ep - xi)) / ((xp - ep) * (xp - xi) * (eta - ep) * (eta - xi)) * -1.0
        val = val * (1 / (ep - xp)) * c2 * (1 / (xi - eta))
        if with_h:
            s1 = xi + ep - eta - xp
            s2 = xi**2 + ep**2 - eta**2 - xp**2
            s3 = xi**3 + ep**3 - eta**3 - xp**3
            val = 2 * val * (s1**4 / 12 + s2**2 / 4 - s1 * s3 / 3)
        return val

    cs = [mixed(sc.xi_in, sc.xi_out, z), mixed(sc.eta_in, sc.eta_out, z), sc.xi_p, sc.eta_p]
    return integrate_tensor(g, cs) * (1 - z) * (1 - 1 / z)


def test_point_and_contour_validation():
    with pytest.raises(InvalidArgument):
        pre.PrelimitPoint(0.0, 0.0, 0.0, 1.0)
    with pytest.raises(InvalidArgument):
        pre.PrelimitPoint(math.nan, 0.0, 0.0, 0.5)
    with pytest.raises(InvalidArgument):
        pre.PrelimitContours(anchors=(-1.0, -1.6, -0.4, 0.4, 1.0, 1.6))
    with pytest.raises(InvalidArgument):
        pre.PrelimitContours(z_radius=1.2)
    with pytest.raises(InvalidArgument):
        pre.PrelimitContours(tail_z_radius=0.9)


def test_T11_matches_independent_mixed_contour_sum():
    got = pre.eval_T_term(1, 1, Z, PT, SMALL)
    want = brute_T11(PT, SMALL, Z)
    assert abs(got - want) <= 1e-12 * abs(want)
    got_d = pre.eval_D_term(1, 1, Z, PT, SMALL)
    assert abs(got_d - brute_T11(PT, SMALL, Z, with_h=False)) <= 1e-12 * abs(got_d)


def test_branch_symmetry_under_xi_swap():
    br = pre.branch_integrals(2, 1, PT, pre.PrelimitContours(nodes_per_leg=3), with_h=False)
    # (in, out) and (out, in) share a key: only counts per family matter
    assert len(br) == 9
    assert (("in", "out"), ("in", "in")) in br


def test_T_terms_reject_poles_of_z():
    for z in (0.0, 1.0):
        with pytest.raises(InvalidArgument):
            pre.eval_T_term(1, 1, z, PT, SMALL)
    with pytest.raises(InvalidArgument):
        pre.branch_integrals(0, 1, PT, SMALL, True)


def test_determinant_route_matches_tensor_11_terms():
    system = pre._DetSystem(PT, SMALL)
    lp, lu = system.log_weights((PT.beta, PT.beta_p, PT.alpha, PT.tau))
    d_det = system.truncated(lp, lu, Z, 1)
    d_tensor = pre.eval_D_term(1, 1, Z, PT, SMALL)
    assert abs(d_det - d_tensor) <= 1e-10 * abs(d_tensor)
    params = (PT.beta, PT.beta_p, PT.alpha, PT.tau)
    t_det = 2.0 * system.d_pre(params, Z, 1)
    t_tensor = pre.eval_T_term(1, 1, Z, PT, SMALL)
    assert abs(t_det - t_tensor) <= 1e-8 * abs(t_tensor)


def test_density_independent_of_z_radius():
    a = pre.eval_prelimit_density(PT, 1, pre.PrelimitContours(nodes_per_leg=16, z_radius=0.3))
    b = pre.eval_prelimit_density(PT, 1, pre.PrelimitContours(nodes_per_leg=16, z_radius=0.6))
    assert a == pytest.approx(b, rel=1e-9)


def test_engines_agree_at_first_order():
    tens = pre.eval_prelimit_density(PT, 1, SMALL, engine="tensor")
    det = pre.eval_prelimit_density(PT, 1, SMALL, engine="determinant")
    assert det == pytest.approx(tens, rel=1e-8)


def test_density_even_in_alpha():
    cfg = pre.PrelimitContours(nodes_per_leg=24)
    a = pre.eval_prelimit_density(pre.PrelimitPoint(0.4, 0.9, 0.3, 0.5), None, cfg)
    b = pre.eval_prelimit_density(pre.PrelimitPoint(0.4, 0.9, -0.3, 0.5), None, cfg)
    assert a > 0 and a == pytest.approx(b, rel=1e-8)


def test_engine_selection_errors():
    with pytest.raises(InvalidArgument):
        pre.eval_prelimit_density(PT, None, SMALL, engine="tensor")
    with pytest.raises(InvalidArgument):
        pre.eval_prelimit_density(PT, 0, SMALL)
    with pytest.raises(InvalidArgument):
        pre.eval_prelimit_density(PT, 1, SMALL, engine="exact")


def test_two_point_tail_is_probability_and_monotone():
    vals = [pre.eval_kpz_two_point_tail(0.0, b2, 0.2, 0.5, n_max=None) for b2 in (-1.0, 0.0, 1.0, 2.0)]
    assert all(0.0 <= v <= 1.0 for v in vals)
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_two_point_tail_matches_gue_asymptotic():
    # b1 -> -∞ leaves P(H(-a, s) >= b2) with s = 1 - τ, a rescaled GUE tail
    b2, a, s = 4.0, 0.2, 0.5
    val = pre.eval_kpz_two_point_tail(-4.0, b2, a, 1.0 - s, n_max=None)
    ref = asy.gue_tail_asymp((b2 + a * a / s) / s ** (1.0 / 3.0))
    assert val / ref == pytest.approx(1.0, abs=0.2)


def test_scaled_point():
    pt = pre.scaled_point(0.5, 2.0, 1.0, 16.0)
    assert (pt.beta, pt.beta_p, pt.alpha, pt.tau) == pytest.approx((0.125, 15.875, 0.125, 1 / 64))
    with pytest.raises(InvalidArgument):
        pre.scaled_point(0.5, 0.0, 1.0, 0.9)
    with pytest.raises(InvalidArgument):
        pre.scaled_point(0.5, 0.0, 1.0, -4.0)


def test_scaled_ratio_symmetric_in_x():
    cfg = pre.PrelimitContours.scaled(9.0, nodes_per_leg=24)
    a = pre.scaled_density_ratio(0.5, 0.6, 1.0, 9.0, n_max=None, contours=cfg)
    b = pre.scaled_density_ratio(0.5, -0.6, 1.0, 9.0, n_max=None, contours=cfg)
    assert a == pytest.approx(b, rel=1e-8)

import math

import pytest

from geodensity import asymptotics as asy
from geodensity.errors import InvalidArgument


def test_gue_values_at_one():
    assert asy.gue_density_asymp(1.0) == pytest.approx(math.exp(-4 / 3) / (8 * math.pi), rel=1e-14)
    assert asy.gue_density_asymp(1.0) == pytest.approx(0.010488, abs=1e-6)
    assert asy.gue_tail_asymp(1.0) == pytest.approx(0.005244, abs=1e-6)


@pytest.mark.parametrize("L", [1.0, 4.0, 30.0, 100.0])
def test_density_over_tail_is_two_sqrt_L(L):
    diff = asy.log_gue_density_asymp(L) - asy.log_gue_tail_asymp(L)
    assert math.exp(diff) == pytest.approx(2 * math.sqrt(L), rel=1e-12)


def test_log_forms_survive_underflow():
    assert asy.gue_tail_asymp(100.0) == 0.0 or asy.gue_tail_asymp(100.0) < 1e-300
    assert asy.log_gue_tail_asymp(100.0) == pytest.approx(-4000 / 3 - math.log(16 * math.pi) - 1.5 * math.log(100), rel=1e-14)


def test_tail_ratio_approaches_exponential():
    for y in (0.5, 1.0):
        assert asy.gue_tail_ratio(100.0, y) == pytest.approx(math.exp(-2 * y), rel=0.02)
        assert abs(asy.gue_tail_ratio(400.0, y) / math.exp(-2 * y) - 1) < abs(asy.gue_tail_ratio(25.0, y) / math.exp(-2 * y) - 1)


def test_tail_is_decreasing():
    vals = [asy.gue_tail_asymp(L) for L in (1.0, 2.0, 4.0, 8.0)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_gue_rejects_nonpositive():
    for bad in (0.0, -1.0, math.inf):
        with pytest.raises(InvalidArgument):
            asy.gue_tail_asymp(bad)


def test_gaussian_reference():
    assert asy.gaussian_limit_ref(0.0, 0.0) == pytest.approx(1 / (2 * math.pi))
    assert asy.gaussian_limit_ref(1.0, -1.0) == pytest.approx(math.exp(-1) / (2 * math.pi))


def test_tail_prefactor_quotients():
    h, x, t = 9.0, 1.5, 2.0
    assert asy.tail_approx_h_hat(h, x, t) / asy.tail_approx_h(h, x, t) == pytest.approx(math.sqrt(t / h), rel=1e-12)
    assert asy.tail_approx_x_hat(h, x, t) / asy.tail_approx_x(h, x, t) == pytest.approx(t / abs(x), rel=1e-12)
    assert asy.tail_approx_x(h, x, t) == pytest.approx(asy.tail_approx_x(h, -x, t), rel=1e-15)


def test_tail_exponent_at_zero_x():
    h, t = 8.0, 1.0
    want = -4 / 3 * h**1.5 + 2 * h - 2 / 3 - math.log(4 * math.pi)
    assert asy.log_tail_approx_h(h, 0.0, t) == pytest.approx(want, rel=1e-14)


def test_tail_argument_errors():
    with pytest.raises(InvalidArgument):
        asy.tail_approx_h(-1.0, 0.0, 1.0)
    with pytest.raises(InvalidArgument):
        asy.tail_approx_h(1.0, 0.0, 0.0)
    with pytest.raises(InvalidArgument):
        asy.tail_approx_h_hat(-0.5, 2.0, 1.0)
    with pytest.raises(InvalidArgument):
        asy.tail_approx_x(1.0, 0.0, 1.0)


def test_refined_tail_tends_to_leading_form():
    hs = (8.0, 12.0, 30.0, 60.0)
    ratios = [asy.refined_tail_h(h, 0.0, 1.0) / asy.tail_approx_h(h, 0.0, 1.0) for h in hs]
    for h, r in zip(hs, ratios):
        assert r == pytest.approx((1 + 1 / math.sqrt(h)) ** 2, rel=1e-12)
    assert all(b < a for a, b in zip(ratios, ratios[1:]))


def test_normalization_result_fields():
    res = asy.normalization_estimate(1.0, panel_nodes=4)
    assert res.mass == pytest.approx(1.0, abs=0.05)
    assert res.h_range[0] < -5 < 8 < res.h_range[1]
    assert res.x_max > 1 and res.evaluations > 0
    assert res.boundary_strip < 1e-2
    with pytest.raises(InvalidArgument):
        asy.normalization_estimate(1.0, density="q")

"""Property checks behind ``geodensity validate``.

Each check returns a ``CheckResult`` whose ``line()`` is deterministic: no
timings or other run-dependent text, so two runs of a suite produce
byte-identical reports.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import asymptotics as asy
from . import prelimit
from .kernels import cauchy_det, h_poly
from .limit_density import DensityPoint, SeriesConfig, apply_D_fd, eval_p, eval_p_hat, eval_ut_tail
from .quadrature import RIGHT_WEDGE, ContourSpec, build_wedge, choose_truncation_radius

SEED = 20240601


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def _g(v: float) -> str:
    return f"{v:.6g}"


# ---------------------------------------------------------------- algebra


def airy_series(x: float, terms: int = 80) -> float:
    """Ai(x) from its Maclaurin series (accurate for moderate |x|)."""
    c1 = 1.0 / (3.0 ** (2.0 / 3.0) * math.gamma(2.0 / 3.0))
    c2 = 1.0 / (3.0 ** (1.0 / 3.0) * math.gamma(1.0 / 3.0))
    f = g = 0.0
    tf, tg = 1.0, x
    for k in range(terms):
        f += tf
        g += tg
        # ratios of consecutive terms of the two power series
        tf *= x**3 / ((3 * k + 2) * (3 * k + 3))
        tg *= x**3 / ((3 * k + 3) * (3 * k + 4))
    return c1 * f - c2 * g


def airy_contour(h: float, nodes: int = 48, eps: float = 1e-16) -> float:
    """``(1/2πi) ∫ exp(v³/3 - h v) dv`` over the right wedge."""
    radius = choose_truncation_radius(1.0, h, 0.0, eps)
    c = build_wedge(ContourSpec(RIGHT_WEDGE, 0.5, radius, nodes))
    return c.integrate(lambda v: np.exp(v**3 / 3.0 - h * v)).real


def check_airy() -> CheckResult:
    start = time.perf_counter()
    errs = [abs(airy_contour(h) / airy_series(h) - 1.0) for h in (0.0, 1.0, 2.0)]
    fast = time.perf_counter() - start < 1.0
    worst = max(errs)
    return CheckResult("airy_oracle", worst < 1e-10 and fast,
                       f"max rel err {worst:.2e} (tol 1e-10), runtime under 1 s: {'yes' if fast else 'no'}")


def check_cauchy(instances: int = 200) -> CheckResult:
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(instances):
        n = int(rng.integers(1, 7))
        w = rng.normal(size=n) + 1j * rng.normal(size=n)
        wp = rng.normal(size=n) + 1j * rng.normal(size=n)
        brute = np.linalg.det(1.0 / (w[:, None] - wp[None, :]))
        worst = max(worst, abs(cauchy_det(w, wp) - brute) / abs(brute))
    return CheckResult("cauchy_product_form", worst < 1e-10, f"{instances} instances, max rel err {worst:.2e} (tol 1e-10)")


def _bidisk(rng, n: int, radius: float) -> np.ndarray:
    r = radius * np.sqrt(rng.uniform(size=n))
    return r * np.exp(2j * math.pi * rng.uniform(size=n))


def check_h_identities(samples: int = 1000, radius: float = 2.0) -> CheckResult:
    rng = np.random.default_rng(SEED + 1)
    us, vs = _bidisk(rng, samples, radius), _bidisk(rng, samples, radius)
    e1 = e2 = 0.0
    for u, v in zip(us, vs):
        scale = (1.0 + abs(u) + abs(v)) ** 4
        e1 = max(e1, abs(h_poly((u, 1.0), (v, -1.0)) - 2.0 * (1.0 - v) * (1.0 + u) * (u - v)) / scale)
        e2 = max(e2, abs(h_poly((u, -1.0, 1.0), (v, 1.0, -1.0))) / scale, abs(h_poly((u,), (v,))) / scale)
    ok = e1 < 1e-12 and e2 < 1e-12
    return CheckResult("h_identities", ok, f"{samples} samples, scaled errors {e1:.1e} and {e2:.1e} (tol 1e-12)")


# ---------------------------------------------------------------- densities

SYM_H = (-1.0, 0.0, 1.0, 2.0, 3.0)
SYM_X = (1.0, 2.0)


def check_x_symmetry(density: str = "p", hs=SYM_H, xs=SYM_X, t: float = 1.0) -> CheckResult:
    evaluate = eval_p if density == "p" else eval_p_hat
    worst = 0.0
    for h in hs:
        for x in xs:
            a, b = evaluate(DensityPoint(h, x, t)), evaluate(DensityPoint(h, -x, t))
            worst = max(worst, abs(a.value - b.value) / (a.err_estimate + b.err_estimate))
    n = len(hs) * (2 * len(xs) + 1)
    return CheckResult(f"x_symmetry_{density}", worst < 1.0,
                       f"{n}-point grid, max |f(x)-f(-x)| / combined err = {worst:.3f} (must be < 1)")


CONV_POINTS = ((-0.5, 0.0, 0.5), (0.0, 1.0, 1.0), (0.5, 0.0, 1.0), (1.0, 1.0, 0.5), (1.5, 0.0, 0.5), (2.0, 1.0, 1.0))


def laguerre_convolution(h: float, x: float, t: float, nodes: int = 40) -> float:
    """``∫_0^∞ p(h' + h, x, t) 2 e^{-2h'} dh'`` by Gauss-Laguerre after h' = y/2."""
    y, w = np.polynomial.laguerre.laggauss(nodes)
    cfg = SeriesConfig(estimate_error=False)
    vals = [eval_p(DensityPoint(h + yi / 2.0, x, t), cfg).value for yi in y]
    return math.fsum(wi * vi for wi, vi in zip(w, vals))


def check_convolution() -> CheckResult:
    """p̂ from its own series (n <= 2, tensor route) against the convolution of p."""
    # the tensor route keeps the default anchors; at x/t = 2 that needs 32 nodes
    cfg = SeriesConfig(engine="tensor", n_max=2, nodes_per_leg=32, estimate_error=False)
    worst = 0.0
    for h, x, t in CONV_POINTS:
        direct = eval_p_hat(DensityPoint(h, x, t), cfg).value
        worst = max(worst, abs(direct / laguerre_convolution(h, x, t) - 1.0))
    return CheckResult("convolution_identity", worst < 1e-3, f"{len(CONV_POINTS)} points, max rel err {worst:.2e} (tol 1e-3)")


DERIV_POINTS = ((0.0, 0.0, 1.0), (0.5, 0.5, 1.0), (1.0, 0.0, 0.5), (-0.5, 1.0, 1.0))


def check_derivative_identity(step: float = 1e-3) -> CheckResult:
    """p = -e^{2h} d/dh ((1/2) e^{-2h} p̂) with a 4th-order central difference."""
    worst = 0.0
    for h, x, t in DERIV_POINTS:
        def g(s):
            return 0.5 * math.exp(-2.0 * s) * eval_p_hat(DensityPoint(s, x, t)).value

        dg = (-g(h + 2 * step) + 8 * g(h + step) - 8 * g(h - step) + g(h - 2 * step)) / (12 * step)
        p = eval_p(DensityPoint(h, x, t)).value
        worst = max(worst, abs(-math.exp(2.0 * h) * dg / p - 1.0))
    return CheckResult("derivative_identity", worst < 1e-2, f"{len(DERIV_POINTS)} points, max rel err {worst:.2e} (tol 1e-2)")


def gaussian_errors(t: float) -> float:
    worst = 0.0
    for h in (-1.0, 0.0, 1.0):
        for x in (-1.0, 0.0, 1.0):
            val = 0.5 * t * eval_p(DensityPoint(t + h * math.sqrt(t), 0.5 * x * math.sqrt(t), t)).value
            ref = asy.gaussian_limit_ref(h, x)
            worst = max(worst, abs(val - ref) / ref)
    return worst


def check_gaussian_limit() -> CheckResult:
    e10, e40 = gaussian_errors(10.0), gaussian_errors(40.0)
    ok = e40 < 0.1 and e40 < e10
    return CheckResult("gaussian_limit", ok, f"max rel err {_g(e10)} at t=10, {_g(e40)} at t=40 (need < 0.1 at t=40 and a decrease)")


def check_tail_h(density: str = "p") -> CheckResult:
    evaluate, approx = (eval_p, asy.tail_approx_h) if density == "p" else (eval_p_hat, asy.tail_approx_h_hat)
    r8 = evaluate(DensityPoint(8.0, 0.0, 1.0)).value / approx(8.0, 0.0, 1.0)
    r12 = evaluate(DensityPoint(12.0, 0.0, 1.0)).value / approx(12.0, 0.0, 1.0)
    ok = 0.8 <= r8 <= 1.2 and abs(r12 - 1.0) < abs(r8 - 1.0)
    return CheckResult(f"tail_h_{density}", ok, f"ratio {_g(r8)} at h=8 (need [0.8, 1.2]), {_g(r12)} at h=12 (need closer to 1)")


def check_tail_x(density: str = "p") -> CheckResult:
    evaluate, approx = (eval_p, asy.tail_approx_x) if density == "p" else (eval_p_hat, asy.tail_approx_x_hat)
    r = evaluate(DensityPoint(0.0, 6.0, 1.0)).value / approx(0.0, 6.0, 1.0)
    return CheckResult(f"tail_x_{density}", 0.8 <= r <= 1.2, f"ratio {_g(r)} at x=6 (need [0.8, 1.2])")


def check_normalization(density: str = "p") -> CheckResult:
    tol = 1e-2 if density == "p" else 2e-2
    # p̂ costs ~30 evaluations of p per point; its mass needs less resolution
    nodes = 6 if density == "p" else 4
    res = asy.normalization_estimate(1.0, density=density, panel_nodes=nodes)
    ok = abs(res.mass - 1.0) < tol
    return CheckResult(f"normalization_{density}", ok,
                       f"mass {res.mass:.6f} on h in [{_g(res.h_range[0])}, {_g(res.h_range[1])}], |x| <= {_g(res.x_max)} (tol {tol:g})")


def check_ut_connection(pt: DensityPoint = DensityPoint(0.5, 0.5, 1.0)) -> CheckResult:
    step = max(1e-2, pt.t / 100.0)
    base = SeriesConfig()
    cfg = base.with_(eps=base.eps / 100.0, estimate_error=False)
    d = apply_D_fd(lambda h, x, t: eval_ut_tail(DensityPoint(h, x, t), cfg).value, pt, step)
    p = eval_p(pt).value
    err = abs(-d / p - 1.0)
    return CheckResult("ut_connection", err < 1e-2, f"-D_fd UT = {_g(-d)} vs p = {_g(p)}, rel err {err:.2e} (tol 1e-2)")


def check_gue_ratio(L: float = 100.0) -> CheckResult:
    errs = [abs(asy.gue_tail_ratio(L, y) / math.exp(-2.0 * y) - 1.0) for y in (0.5, 1.0)]
    return CheckResult("gue_tail_ratio", max(errs) < 0.02, f"rel dev {errs[0]:.2e} (y=0.5), {errs[1]:.2e} (y=1) (tol 0.02)")


def check_ut_bounds() -> CheckResult:
    vals = [eval_ut_tail(DensityPoint(h, 0.3, 1.0)) for h in (-1.0, 0.0, 1.0, 2.0)]
    inside = all(-v.err_estimate <= v.value <= 1.0 + v.err_estimate for v in vals)
    mono = all(b.value >= a.value - a.err_estimate - b.err_estimate for a, b in zip(vals, vals[1:]))
    return CheckResult("ut_tail_probability", inside and mono,
                       "values " + ", ".join(_g(v.value) for v in vals) + " (need in [0, 1], nondecreasing in h)")


def check_fd_operator() -> CheckResult:
    pt = DensityPoint(0.3, 0.2, 1.0)
    cases = [
        (lambda h, x, t: math.exp(2 * h), 4.0 / 3.0 * math.exp(0.6)),
        (lambda h, x, t: h**4, 2.0),
        (lambda h, x, t: h * t, 1.0),
    ]
    errs = [abs(apply_D_fd(f, pt, 1e-2) / want - 1.0) for f, want in cases]
    return CheckResult("fd_operator", max(errs) < 1e-3, f"max rel err {max(errs):.1e} on e^2h, h^4, h t (tol 1e-3)")


def check_positivity() -> CheckResult:
    worst, count = 0.0, 0
    for t in (0.5, 1.0, 2.0):
        for h in np.linspace(-2.0, 4.0, 7):
            for x in np.linspace(0.0, 3.0, 4):
                r = eval_p(DensityPoint(float(h), float(x), t))
                count += 1
                if r.value < 0:
                    worst = max(worst, -r.value / max(r.err_estimate, 1e-300))
    return CheckResult("positivity", worst <= 1.0, f"{count} points, worst negative value / err = {worst:.3f} (must be <= 1)")


def check_series_decay() -> CheckResult:
    ok, parts = True, []
    for h, x in ((8.0, 0.0), (0.0, 6.0), (4.0, 2.0)):
        terms = [abs(c) for c in eval_p(DensityPoint(h, x, 1.0), with_terms=True).terms]
        ratios = [b / a for a, b in zip(terms, terms[1:])]
        worst = max(ratios) if ratios else 0.0
        ok &= worst < 1.0
        parts.append(f"({_g(h)},{_g(x)}) {_g(worst)}")
    return CheckResult("series_decay", ok, "max |term_(n+1)/term_n|: " + ", ".join(parts) + " (must be < 1)")


PRELIMIT_L = (16.0, 25.0, 36.0)


def prelimit_gaps(h: float = 0.5, x: float = 0.0, t: float = 1.0, Ls=PRELIMIT_L) -> tuple[list[float], float]:
    p = eval_p(DensityPoint(h, x, t)).value
    ratios = [prelimit.scaled_density_ratio(h, x, t, L, n_max=1) for L in Ls]
    return ratios, p


def check_prelimit() -> CheckResult:
    ratios, p = prelimit_gaps()
    gaps = [abs(r - p) / p for r in ratios]
    ok = all(b < a for a, b in zip(gaps, gaps[1:]))
    seq = ", ".join(f"L={_g(L)}: {_g(r)} (gap {g:.2e})" for L, r, g in zip(PRELIMIT_L, ratios, gaps))
    return CheckResult("prelimit_convergence", ok, f"p={_g(p)}; {seq} (need strictly decreasing gaps)")


FAST: tuple[Callable[[], CheckResult], ...] = (
    check_airy,
    check_cauchy,
    check_h_identities,
    check_fd_operator,
    lambda: check_x_symmetry("p", hs=(0.0, 1.0), xs=(0.7,)),
    check_ut_bounds,
    check_gue_ratio,
)
FULL = (
    check_airy,
    check_cauchy,
    check_h_identities,
    check_fd_operator,
    lambda: check_x_symmetry("p"),
    lambda: check_x_symmetry("p_hat"),
    check_convolution,
    check_derivative_identity,
    check_gaussian_limit,
    lambda: check_tail_h("p"),
    lambda: check_tail_x("p"),
    lambda: check_tail_h("p_hat"),
    lambda: check_tail_x("p_hat"),
    lambda: check_normalization("p"),
    lambda: check_normalization("p_hat"),
    check_ut_connection,
    check_ut_bounds,
    check_positivity,
    check_series_decay,
    check_gue_ratio,
)
SLOW = FULL + (check_prelimit,)
SUITES = ("fast", "full", "slow")
_SUITE_CHECKS = {"fast": FAST, "full": FULL, "slow": SLOW}


def run_suite(name: str):
    """Yield check results one at a time so callers can stream them."""
    for check in _SUITE_CHECKS[name]:
        yield check()


def summary_line(results, suite: str) -> str:
    ok = all(r.passed for r in results)
    return f"{'ALL PASS' if ok else 'SOME FAIL'} suite={suite} checks={len(results)}"


def render_report(results, suite: str) -> str:
    """The log text written by ``geodensity validate --log``."""
    return "\n".join([r.line() for r in results] + [summary_line(results, suite)]) + "\n"

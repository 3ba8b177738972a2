"""Closed-form reference formulas: GUE Tracy-Widom tails, the Gaussian
large-time target, and leading-order right tails of p and p̂.

Every formula here is leading order only.  Tolerances belong to the callers.
The ``log_*`` variants are the primary implementations; the plain versions
exponentiate them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument


def _positive(name: str, val: float) -> float:
    if not (val > 0 and math.isfinite(val)):
        raise InvalidArgument(f"{name} must be positive and finite, got {val!r}")
    return float(val)


def log_gue_density_asymp(L: float) -> float:
    L = _positive("L", L)
    return -4.0 / 3.0 * L**1.5 - math.log(8.0 * math.pi * L)


def gue_density_asymp(L: float) -> float:
    """Leading upper-tail density of the GUE Tracy-Widom law."""
    return math.exp(log_gue_density_asymp(L))


def log_gue_tail_asymp(L: float) -> float:
    L = _positive("L", L)
    return -4.0 / 3.0 * L**1.5 - math.log(16.0 * math.pi) - 1.5 * math.log(L)


def gue_tail_asymp(L: float) -> float:
    """Leading upper tail ``1 - F_GUE(L)``."""
    return math.exp(log_gue_tail_asymp(L))


def gue_tail_ratio(L: float, y: float) -> float:
    """``(1-F)(L + y L^{-1/2}) / (1-F)(L)`` from the asymptotic tail; tends to e^{-2y}."""
    return math.exp(log_gue_tail_asymp(L + y / math.sqrt(L)) - log_gue_tail_asymp(L))


def gaussian_limit_ref(h: float, x: float) -> float:
    """Product of two standard normal densities."""
    return math.exp(-0.5 * (h * h + x * x)) / (2.0 * math.pi)


def _radicand(h: float, x: float, t: float) -> float:
    _positive("t", t)
    nu = h + x * x / t
    if not nu > 0:
        raise InvalidArgument(f"h + x^2/t must be positive, got {nu}")
    return nu


def _log_tail_exponent(h: float, x: float, t: float) -> float:
    nu = _radicand(h, x, t)
    return -4.0 / 3.0 * nu**1.5 / math.sqrt(t) + 2.0 * h - 2.0 * t / 3.0


def log_tail_approx_h(h: float, x: float, t: float) -> float:
    return _log_tail_exponent(h, x, t) - math.log(4.0 * math.pi * t)


def tail_approx_h(h: float, x: float, t: float) -> float:
    """Leading right tail of p as h grows."""
    return math.exp(log_tail_approx_h(h, x, t))


def log_tail_approx_h_hat(h: float, x: float, t: float) -> float:
    if not h > 0:
        raise InvalidArgument(f"h must be positive for the p̂ tail, got {h}")
    return _log_tail_exponent(h, x, t) - math.log(4.0 * math.pi * math.sqrt(h * t))


def tail_approx_h_hat(h: float, x: float, t: float) -> float:
    return math.exp(log_tail_approx_h_hat(h, x, t))


def _check_x(x: float) -> None:
    if x == 0:
        raise InvalidArgument("x must be nonzero for the x-tail approximation")


def log_tail_approx_x(h: float, x: float, t: float) -> float:
    _check_x(x)
    return _log_tail_exponent(h, x, t) - math.log(2.0 * math.pi * abs(x))


def tail_approx_x(h: float, x: float, t: float) -> float:
    """Leading tail of p as |x| grows."""
    return math.exp(log_tail_approx_x(h, x, t))


def log_tail_approx_x_hat(h: float, x: float, t: float) -> float:
    _check_x(x)
    return _log_tail_exponent(h, x, t) + math.log(t / (2.0 * math.pi * x * x))


def tail_approx_x_hat(h: float, x: float, t: float) -> float:
    return math.exp(log_tail_approx_x_hat(h, x, t))


def refined_tail_h(h: float, x: float, t: float) -> float:
    """Tail of p keeping the finite-M prefactor before its M → ∞ limit.

    With ``M = t^{-1/6} (h + x²/t)^{1/2}`` the prefactor is
    ``((1 + t^{-1/3} M)² - x²/t²) / (4π t^{1/3} M²)``, which tends to the
    ``1/(4πt)`` of ``tail_approx_h`` only slowly.  Diagnostic use.
    """
    nu = _radicand(h, x, t)
    M = t ** (-1.0 / 6.0) * math.sqrt(nu)
    a = 1.0 + t ** (-1.0 / 3.0) * M
    pref = (a * a - x * x / (t * t)) / (4.0 * math.pi * t ** (1.0 / 3.0) * M * M)
    return pref * math.exp(_log_tail_exponent(h, x, t))


# --- normalization -------------------------------------------------------------------

TAIL_CUT = 1e-10
STRIP_TOL = 1e-3


@dataclass(frozen=True)
class NormalizationResult:
    mass: float
    boundary_strip: float
    h_range: tuple[float, float]
    x_max: float
    evaluations: int

    def __float__(self) -> float:
        return self.mass


def _gl_panels(a: float, b: float, panels: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(m)
    edges = np.linspace(a, b, panels + 1)
    nodes, wts = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        nodes.append(0.5 * (hi - lo) * x + 0.5 * (hi + lo))
        wts.append(0.5 * (hi - lo) * w)
    return np.concatenate(nodes), np.concatenate(wts)


def _upper_h(t: float) -> float:
    h = max(1.0, t)
    while log_tail_approx_h(h, 0.0, t) > math.log(TAIL_CUT):
        h += 0.5 * max(1.0, t ** (1.0 / 3.0))
    return h


def _x_extent(t: float, h_hi: float) -> float:
    x = 0.5 * max(1.0, t ** (2.0 / 3.0))
    hs = np.linspace(0.0, h_hi, 9)
    while max(log_tail_approx_x(h, x, t) for h in hs) > math.log(TAIL_CUT):
        x += 0.25 * max(1.0, t ** (2.0 / 3.0))
    return x


def normalization_estimate(
    t: float,
    cfg=None,
    density: str = "p",
    panel_nodes: int = 10,
    h_lower: float | None = None,
    max_extensions: int = 8,
) -> NormalizationResult:
    """Total mass of p (or p̂) at time t by Gauss-Legendre panels on a rectangle.

    The upper h limit and the x extent come from the tail formulas.  The
    lower h limit starts at ``h_lower`` (default ``-6 t^{1/3}``) and moves
    down one strip at a time until a strip carries less than ``STRIP_TOL``
    of the mass; the last strip's mass is reported as the error proxy.
    The integrand is even in x, so only x >= 0 is sampled.
    """
    from .limit_density import DensityPoint, SeriesConfig, eval_p, eval_p_hat

    t = _positive("t", t)
    if density not in ("p", "p_hat"):
        raise InvalidArgument(f"density must be 'p' or 'p_hat', got {density!r}")
    cfg = cfg or SeriesConfig(estimate_error=False)
    if cfg.estimate_error:
        cfg = cfg.with_(estimate_error=False)
    evaluate = eval_p if density == "p" else eval_p_hat
    scale = max(1.0, t ** (1.0 / 3.0))
    h_hi = _upper_h(t)
    h_lo = -6.0 * scale if h_lower is None else float(h_lower)
    if not h_lo < h_hi:
        raise InvalidArgument(f"h_lower must lie below {h_hi}")
    x_max = _x_extent(t, h_hi)
    xs, wx = _gl_panels(0.0, x_max, max(1, math.ceil(x_max / (2.0 * scale**2))), panel_nodes)
    count = 0

    def band(a: float, b: float, panels: int) -> float:
        nonlocal count
        hs, wh = _gl_panels(a, b, panels, panel_nodes)
        total = 0.0
        for h, w1 in zip(hs, wh):
            row = [evaluate(DensityPoint(float(h), float(x), t), cfg).value for x in xs]
            count += len(row)
            total += w1 * 2.0 * math.fsum(w2 * v for w2, v in zip(wx, row))
        return total

    mass = band(h_lo, h_hi, max(1, math.ceil((h_hi - h_lo) / (6.0 * scale))))
    step = 2.0 * scale
    strip = band(h_lo - step, h_lo, 1)
    mass += strip
    h_lo -= step
    for _ in range(max_extensions):
        if abs(strip) < STRIP_TOL * abs(mass):
            break
        strip = band(h_lo - step, h_lo, 1)
        mass += strip
        h_lo -= step
    return NormalizationResult(mass, abs(strip), (h_lo, h_hi), x_max, count)

"""Finite-scale geodesic density and the two-point KPZ tail.

Both are z-contour integrals of double series whose terms are tensor
integrals over six parallel wedge contours.  For each ξ and η variable the
"mixed" contour (1/(1-z)) ∫_in - (z/(1-z)) ∫_out is expanded into its
branches, so every tensor integral runs over a fixed product of contours and
is computed once; the z-dependence is then carried by scalar coefficients.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import asymptotics
from .errors import InvalidArgument, NonFiniteResult
from .fredholm import log1p_complex
from .kernels import cauchy_det_batch, h_poly_batch
from .quadrature import (
    LEFT_WEDGE,
    RIGHT_WEDGE,
    ContourSpec,
    SampledContour,
    build_circle,
    build_wedge,
    decay_leg_length,
    integrate_tensor,
)

IN, OUT = "in", "out"


@dataclass(frozen=True)
class PrelimitPoint:
    beta: float
    beta_p: float
    alpha: float
    tau: float

    def __post_init__(self) -> None:
        for name in ("beta", "beta_p", "alpha", "tau"):
            val = getattr(self, name)
            if not math.isfinite(val):
                raise InvalidArgument(f"{name} must be finite, got {val!r}")
            object.__setattr__(self, name, float(val))
        if not 0.0 < self.tau < 1.0:
            raise InvalidArgument(f"tau must lie in (0, 1), got {self.tau}")


@dataclass(frozen=True)
class PrelimitContours:
    """Anchors of C_L^in, C_L, C_L^out, C_R^out, C_R, C_R^in and the z-circles."""

    anchors: tuple[float, float, float, float, float, float] = (-1.6, -1.0, -0.4, 0.4, 1.0, 1.6)
    nodes_per_leg: int = 24
    eps: float = 1e-15
    z_nodes: int = 32
    z_radius: float = 0.5
    tail_z_radius: float = 2.0

    def __post_init__(self) -> None:
        a = tuple(float(v) for v in self.anchors)
        if len(a) != 6:
            raise InvalidArgument("six anchors are required")
        object.__setattr__(self, "anchors", a)
        if not (a[0] < a[1] < a[2] < 0.0 < a[3] < a[4] < a[5]):
            raise InvalidArgument(f"anchors must satisfy L_in < L < L_out < 0 < R_out < R < R_in, got {a}")
        if self.nodes_per_leg < 2 or self.z_nodes < 4:
            raise InvalidArgument("too few quadrature nodes")
        if not 0.0 < self.z_radius < 1.0:
            raise InvalidArgument(f"z_radius must lie in (0, 1), got {self.z_radius}")
        if not self.tail_z_radius > 1.0:
            raise InvalidArgument(f"tail_z_radius must exceed 1, got {self.tail_z_radius}")

    @classmethod
    def scaled(cls, L: float, **kwargs) -> "PrelimitContours":
        """Anchors at ±1.5√L, ±√L, ±0.5√L, matching the large-L concentration."""
        s = math.sqrt(L)
        return cls(anchors=(-1.5 * s, -s, -0.5 * s, 0.5 * s, s, 1.5 * s), **kwargs)


def log_f1(pt: PrelimitPoint, w):
    # f_{β,α;τ}
    return -pt.tau * w**3 / 3.0 + pt.alpha * w**2 + pt.beta * w


def log_f2(pt: PrelimitPoint, w):
    # f_{β',-α;1-τ}
    return -(1.0 - pt.tau) * w**3 / 3.0 - pt.alpha * w**2 + pt.beta_p * w


@dataclass(frozen=True)
class _Sampled:
    xi_in: SampledContour
    xi_out: SampledContour
    eta_in: SampledContour
    eta_out: SampledContour
    xi_p: SampledContour
    eta_p: SampledContour


def _wedge(kind: str, anchor: float, log_mag, eps: float, nodes: int) -> SampledContour:
    angle = 2.0 * math.pi / 3.0 if kind == LEFT_WEDGE else math.pi / 3.0
    length = decay_leg_length(log_mag, anchor, angle, eps, r_max=_scan_range(anchor))
    return build_wedge(ContourSpec(kind, anchor, length, nodes, strict=False))


def _scan_range(anchor: float) -> float:
    return max(60.0, 10.0 * abs(anchor))


def sample_contours(pt: PrelimitPoint, contours: PrelimitContours) -> _Sampled:
    a = contours.anchors
    m, eps = contours.nodes_per_leg, contours.eps

    def g1(w):
        return log_f1(pt, w).real

    def g2(w):
        return log_f2(pt, w).real

    def ng1(w):
        return -log_f1(pt, w).real

    def ng2(w):
        return -log_f2(pt, w).real

    return _Sampled(
        xi_in=_wedge(LEFT_WEDGE, a[0], g1, eps, m),
        xi_out=_wedge(LEFT_WEDGE, a[2], g1, eps, m),
        eta_in=_wedge(RIGHT_WEDGE, a[5], ng1, eps, m),
        eta_out=_wedge(RIGHT_WEDGE, a[3], ng1, eps, m),
        xi_p=_wedge(LEFT_WEDGE, a[1], g2, eps, m),
        eta_p=_wedge(RIGHT_WEDGE, a[4], ng2, eps, m),
    )


def _integrand(n: int, np_: int, pt: PrelimitPoint, with_h: bool, log_offset: float):
    def g(*ws):
        xi = np.stack(ws[:n], axis=-1)
        eta = np.stack(ws[n:2 * n], axis=-1)
        xi_p = np.stack(ws[2 * n:2 * n + np_], axis=-1)
        eta_p = np.stack(ws[2 * n + np_:], axis=-1)
        expo = (
            np.sum(log_f1(pt, xi) - log_f1(pt, eta), axis=-1)
            + np.sum(log_f2(pt, xi_p) - log_f2(pt, eta_p), axis=-1)
            + log_offset
        )
        cd = (
            cauchy_det_batch(eta_p, xi_p)
            * cauchy_det_batch(np.concatenate((xi_p, eta), -1), np.concatenate((eta_p, xi), -1))
            * cauchy_det_batch(xi, eta)
        )
        val = np.exp(expo) * cd
        if with_h:
            val = 2.0 * val * h_poly_batch(np.concatenate((xi, eta_p), -1), np.concatenate((eta, xi_p), -1))
        return val

    return g


def _branch_key(choice_xi, choice_eta):
    # the integrand is symmetric within each family, so only counts matter
    return (tuple(sorted(choice_xi)), tuple(sorted(choice_eta)))


def branch_integrals(
    n: int, np_: int, pt: PrelimitPoint, contours: PrelimitContours, with_h: bool, log_offset: float = 0.0
) -> dict:
    """Tensor integrals for every in/out assignment of the ξ and η variables.

    Keys are (ξ choices, η choices) with "in" sorted before "out".
    """
    if n < 1 or np_ < 1:
        raise InvalidArgument("n and n' must be at least 1")
    sc = sample_contours(pt, contours)
    pick_xi = {IN: sc.xi_in, OUT: sc.xi_out}
    pick_eta = {IN: sc.eta_in, OUT: sc.eta_out}
    g = _integrand(n, np_, pt, with_h, log_offset)
    out = {}
    for cx in itertools.product((IN, OUT), repeat=n):
        for ce in itertools.product((IN, OUT), repeat=n):
            key = _branch_key(cx, ce)
            if key in out:
                continue
            cs = [pick_xi[c] for c in key[0]] + [pick_eta[c] for c in key[1]] + [sc.xi_p] * np_ + [sc.eta_p] * np_
            out[key] = integrate_tensor(g, cs)
    return out


def _mixed_coeff(choice: str, z: complex) -> complex:
    return 1.0 / (1.0 - z) if choice == IN else -z / (1.0 - z)


def _combine(branches: dict, n: int, np_: int, z: complex) -> complex:
    total = 0.0 + 0.0j
    for cx in itertools.product((IN, OUT), repeat=n):
        for ce in itertools.product((IN, OUT), repeat=n):
            coeff = 1.0 + 0.0j
            for c in cx + ce:
                coeff *= _mixed_coeff(c, z)
            total += coeff * branches[_branch_key(cx, ce)]
    return total * (1.0 - z) ** np_ * (1.0 - 1.0 / z) ** n


def _check_z(z: complex) -> complex:
    z = complex(z)
    if abs(z) < 1e-14 or abs(z - 1.0) < 1e-14:
        raise InvalidArgument(f"z must avoid 0 and 1, got {z}")
    return z


def eval_T_term(n: int, np_: int, z: complex, pt: PrelimitPoint, contours: PrelimitContours | None = None) -> complex:
    """T_{n,n'}(z) including its overall factor 2 and the polynomial factor."""
    z = _check_z(z)
    contours = contours or PrelimitContours()
    return _combine(branch_integrals(n, np_, pt, contours, True), n, np_, z)


def eval_D_term(n: int, np_: int, z: complex, pt: PrelimitPoint, contours: PrelimitContours | None = None) -> complex:
    """D_{n,n'}(z): the same as T_{n,n'} without the factor 2 and the polynomial."""
    z = _check_z(z)
    contours = contours or PrelimitContours()
    return _combine(branch_integrals(n, np_, pt, contours, False), n, np_, z)


# ------------------------------------------------------------ tensor route


def _z_series(
    pt: PrelimitPoint, n_max: int, contours: PrelimitContours, with_h: bool, radius: float, measure, log_offset: float
) -> complex:
    if n_max < 1:
        raise InvalidArgument(f"n_max must be >= 1, got {n_max}")
    circle = build_circle(0.0, radius, contours.z_nodes)
    branches = {
        (n, m): branch_integrals(n, m, pt, contours, with_h, log_offset)
        for n in range(1, n_max + 1)
        for m in range(1, n_max + 1)
    }
    total = 0.0 + 0.0j
    for z, w in zip(circle.points, circle.weights):
        s = 0.0 + 0.0j
        for (n, m), br in branches.items():
            s += _combine(br, n, m, z) / (math.factorial(n) ** 2 * math.factorial(m) ** 2)
        total += w * measure(z) * s
    return total


# ------------------------------------------------------- determinant route

# derivative directions in (β, β', α, τ); H is D_pre = (∂β-∂β')⁴/12 + ∂α²/4 + (∂β-∂β')∂τ
# acting on the weights, so T_{n,n'} = 2 D_pre D_{n,n'}
PRE_DIRECTIONS = (
    ((1.0, -1.0, 0.0, 0.0), 4),
    ((0.0, 0.0, 1.0, 0.0), 2),
    ((1.0, -1.0, 0.0, 1.0), 2),
    ((1.0, -1.0, 0.0, -1.0), 2),
)
JET_POINTS = 16
# complex step times the largest |rate| over the nodes
JET_SCALE = 1.0
MARK_POINTS = 4
MARK_RADIUS = 0.3


def _det_minus_one(M: np.ndarray) -> complex:
    """det(I + M) - 1, from eigenvalues when the LU value would cancel."""
    if M.size == 0:
        return 0.0j
    d = np.linalg.det(np.eye(len(M)) + M)
    if abs(d - 1.0) > 1e-2:
        return complex(d - 1.0)
    mu = np.linalg.eigvals(M)
    return complex(np.expm1(np.sum(log1p_complex(mu))))


class _DetSystem:
    """Quadrature nodes plus the unweighted Cauchy blocks of the summed series.

    Summing the three Cauchy determinants over subsets of nodes gives the
    principal-minor expansion of det(I + K) with ``K = diag(w) [[0, Q], [-N, 0]]``
    on the index set (ξ', η, η', ξ): Q holds the middle Cauchy matrix and
    N = diag(C(η'; ξ'), C(ξ; η)).  With P = (ξ', η') and U = (η, ξ),

        Σ_{n,n'>=1} = det(I+K_UU) (det(I+K_PP-E) - 1) - (det(I+K_PP) - 1),

    E being the Schur correction; both brackets come from eigenvalues so that
    tiny tails survive.
    """

    def __init__(self, pt: PrelimitPoint, contours: PrelimitContours):
        sc = sample_contours(pt, contours)
        self.xi = np.concatenate((sc.xi_in.points, sc.xi_out.points))
        self.eta = np.concatenate((sc.eta_in.points, sc.eta_out.points))
        self.xi_in = np.arange(len(self.xi)) < len(sc.xi_in)
        self.eta_in = np.arange(len(self.eta)) < len(sc.eta_in)
        self.q_xi = np.concatenate((sc.xi_in.weights, sc.xi_out.weights))
        self.q_eta = np.concatenate((sc.eta_in.weights, sc.eta_out.weights))
        self.xp, self.q_xp = sc.xi_p.points, sc.xi_p.weights
        self.ep, self.q_ep = sc.eta_p.points, sc.eta_p.weights
        xi, eta, xp, ep = self.xi, self.eta, self.xp, self.ep
        cm = _cauchy_matrix
        # nonzero off-diagonal blocks of K, before row weights
        self.c_xp_ep, self.c_ep_xp = cm(xp, ep), -cm(ep, xp)
        self.c_eta_xi, self.c_xi_eta = cm(eta, xi), -cm(xi, eta)
        self.c_xp_xi, self.c_eta_ep = cm(xp, xi), cm(eta, ep)

    def log_weights(self, params) -> tuple[np.ndarray, np.ndarray]:
        """Logs of the parameter-dependent weights on the P and U blocks."""
        b, bp, a, tau = params
        f1 = lambda w: -tau * w**3 / 3.0 + a * w**2 + b * w  # noqa: E731
        f2 = lambda w: -(1.0 - tau) * w**3 / 3.0 - a * w**2 + bp * w  # noqa: E731
        lp = np.concatenate((f2(self.xp), -f2(self.ep)))
        lu = np.concatenate((-f1(self.eta), f1(self.xi)))
        return lp, lu

    def rates(self, d) -> tuple[np.ndarray, np.ndarray]:
        db, dbp, da, dt = d
        r1 = lambda w: db * w + da * w**2 - dt * w**3 / 3.0  # noqa: E731
        r2 = lambda w: dbp * w - da * w**2 + dt * w**3 / 3.0  # noqa: E731
        return np.concatenate((r2(self.xp), -r2(self.ep))), np.concatenate((-r1(self.eta), r1(self.xi)))

    def series(self, lp, lu, z: complex, marks=(1.0, 1.0)) -> complex:
        m_in, m_out = 1.0 / (1.0 - z), -z / (1.0 - z)
        mix_eta = np.where(self.eta_in, m_in, m_out)
        mix_xi = np.where(self.xi_in, m_in, m_out) * (1.0 - 1.0 / z) * marks[0]
        wp = np.exp(lp) * np.concatenate((self.q_xp * (1.0 - z) * marks[1], self.q_ep))
        wu = np.exp(lu) * np.concatenate((self.q_eta * mix_eta, self.q_xi * mix_xi))
        npp, ne = len(self.xp), len(self.eta)
        w_xp, w_ep, w_eta, w_xi = wp[:npp, None], wp[npp:, None], wu[:ne, None], wu[ne:, None]
        # det(I + [[0, B], [C, 0]]) = det(I - BC); working with BC keeps the
        # small eigenvalues of the primed block from cancelling in ± pairs
        b_p, c_p = w_xp * self.c_xp_ep, w_ep * self.c_ep_xp
        b_u, c_u = w_eta * self.c_eta_xi, w_xi * self.c_xi_eta
        lu_piv = scipy.linalg.lu_factor(np.eye(ne) - b_u @ c_u, check_finite=False)
        swaps = np.count_nonzero(lu_piv[1] != np.arange(ne))
        a = (-1.0) ** swaps * np.prod(np.diag(lu_piv[0]))
        x_eta = scipy.linalg.lu_solve(lu_piv, w_eta * self.c_eta_ep, check_finite=False)
        e = (w_xp * self.c_xp_xi) @ (-c_u @ x_eta)
        return a * _det_minus_one(-(b_p - e) @ c_p) - _det_minus_one(-b_p @ c_p)

    def truncated(self, lp, lu, z: complex, n_max: int | None) -> complex:
        """Σ over 1 <= n, n' <= n_max, by a DFT in the order-marking variables."""
        if n_max is None:
            return self.series(lp, lu, z)
        m = max(MARK_POINTS, n_max + 2)
        # aliasing from orders >= m is damped by MARK_RADIUS**m
        roots = MARK_RADIUS * np.exp(2j * math.pi * np.arange(m) / m)
        grid = np.array([[self.series(lp, lu, z, (a, b)) for b in roots] for a in roots])
        coeff = np.fft.fft2(grid) / (m * m)
        k = np.arange(1, n_max + 1)
        scale = MARK_RADIUS ** (k[:, None] + k[None, :])
        return complex(np.sum(coeff[1:n_max + 1, 1:n_max + 1] / scale))

    def d_pre(self, params, z: complex, n_max: int | None) -> complex:
        """D_pre of the summed series at complex-step Taylor coefficients."""
        lp0, lu0 = self.log_weights(params)
        unit = np.exp(2j * math.pi * np.arange(JET_POINTS) / JET_POINTS)
        coeffs = []
        for d, order in PRE_DIRECTIONS:
            rp, ru = self.rates(d)
            r = JET_SCALE / max(np.max(np.abs(rp)), np.max(np.abs(ru)))
            eps = r * unit
            vals = [self.truncated(lp0 + e * rp, lu0 + e * ru, z, n_max) for e in eps]
            c = np.fft.fft(vals) / JET_POINTS
            coeffs.append(c[order] / r**order)
        c4, c2a, c2p, c2m = coeffs
        return 24.0 * c4 / 12.0 + 2.0 * c2a / 4.0 + 0.5 * (c2p - c2m)


def _cauchy_matrix(r: np.ndarray, c: np.ndarray) -> np.ndarray:
    return 1.0 / (r[:, None] - c[None, :])


def two_point_series(pt: PrelimitPoint, contours: PrelimitContours, z: complex, marks=(1.0, 1.0)) -> complex:
    """Σ_{n,n'>=1} D_{n,n'}(z) / ((n!)^2 (n'!)^2), all orders at once.

    The coefficient of ``marks[0]**n * marks[1]**n'`` is the (n, n') term.
    """
    z = _check_z(z)
    system = _DetSystem(pt, contours)
    lp, lu = system.log_weights((pt.beta, pt.beta_p, pt.alpha, pt.tau))
    return system.series(lp, lu, z, marks)


def _half_circle_real(radius: float, m: int, g) -> float:
    """Real part of the trapezoid sum of ``g`` over a circle, for g(z̄) = conj(g(z)).

    Only nodes with Im z >= 0 are evaluated; the others are mirror images.
    """
    circle = build_circle(0.0, radius, m)
    total = []
    for j in range(m // 2 + 1):
        mult = 1.0 if j == 0 or 2 * j == m else 2.0
        total.append(mult * (circle.weights[j] * g(circle.points[j])).real)
    return math.fsum(total)


def _det_density_integral(pt: PrelimitPoint, contours: PrelimitContours, n_max: int | None) -> complex:
    system = _DetSystem(pt, contours)
    params = (pt.beta, pt.beta_p, pt.alpha, pt.tau)
    return complex(
        _half_circle_real(
            contours.z_radius,
            contours.z_nodes,
            lambda z: 2.0 * system.d_pre(params, z, n_max) / (1.0 - z) ** 2,
        )
    )


# ------------------------------------------------------------- public API

TENSOR, DETERMINANT = "tensor", "determinant"


def _engine(engine: str | None, n_max: int | None) -> str:
    if n_max is not None and (not isinstance(n_max, (int, np.integer)) or n_max < 1):
        raise InvalidArgument(f"n_max must be a positive integer or None, got {n_max!r}")
    if engine is None:
        return TENSOR if n_max == 1 else DETERMINANT
    if engine not in (TENSOR, DETERMINANT):
        raise InvalidArgument(f"engine must be {TENSOR!r} or {DETERMINANT!r}, got {engine!r}")
    if engine == TENSOR and n_max is None:
        raise InvalidArgument("the tensor engine needs a finite n_max")
    return engine


def _default_contours(engine: str) -> PrelimitContours:
    return PrelimitContours() if engine == TENSOR else PrelimitContours(nodes_per_leg=48)


def _finite(val: complex, what: str) -> float:
    if not np.isfinite(val):
        raise NonFiniteResult(f"{what} produced a non-finite value")
    return float(val.real)


def eval_prelimit_density(
    pt: PrelimitPoint, n_max: int | None = 1, contours: PrelimitContours | None = None, engine: str | None = None
) -> float:
    """Density of (ℒ(τ), ℒ(1) - ℒ(τ), π(τ)) at (β, β', α), truncated at n, n' <= n_max.

    ``engine=None`` uses tensor integrals for n_max = 1 and determinants
    otherwise; ``n_max=None`` keeps every order.
    """
    engine = _engine(engine, n_max)
    contours = contours or _default_contours(engine)
    if engine == TENSOR:
        val = _z_series(pt, n_max, contours, True, contours.z_radius, lambda z: 1.0 / (1.0 - z) ** 2, 0.0)
    else:
        val = _det_density_integral(pt, contours, n_max)
    return _finite(val, "pre-limit density")


def eval_kpz_two_point_tail(
    b1: float,
    b2: float,
    a: float,
    tau: float,
    n_max: int | None = 1,
    contours: PrelimitContours | None = None,
    engine: str | None = None,
) -> float:
    """P(H(-a, 1-τ) >= b2, H(0, 1) >= b1 + b2) for the narrow-wedge KPZ fixed point.

    Very negative b1 is out of reach in double precision: the summed series
    then is a vanishing Fredholm determinant assembled from entries of size
    ``e^{|b1| d}`` with d the contour gap.
    """
    pt = PrelimitPoint(b1, b2, a, tau)
    engine = _engine(engine, n_max)
    contours = contours or _default_contours(engine)
    measure = lambda z: 1.0 / (z * (1.0 - z))  # noqa: E731
    if engine == TENSOR:
        val = _z_series(pt, n_max, contours, False, contours.tail_z_radius, measure, 0.0)
    else:
        system = _DetSystem(pt, contours)
        lp, lu = system.log_weights((pt.beta, pt.beta_p, pt.alpha, pt.tau))
        val = complex(
            _half_circle_real(
                contours.tail_z_radius, contours.z_nodes, lambda z: measure(z) * system.truncated(lp, lu, z, n_max)
            )
        )
    return _finite(val, "two-point tail")


def scaled_point(h: float, x: float, t: float, L: float) -> PrelimitPoint:
    if not (L > 0 and math.isfinite(L)):
        raise InvalidArgument(f"L must be positive, got {L}")
    tau = t * L**-1.5
    if not 0.0 < tau < 1.0:
        raise InvalidArgument(f"need 0 < t L^(-3/2) < 1, got t L^(-3/2) = {tau}")
    s = math.sqrt(L)
    return PrelimitPoint(h / s, L - h / s, x / L, tau)


def scaled_density_ratio(
    h: float,
    x: float,
    t: float,
    L: float,
    n_max: int | None = 1,
    contours: PrelimitContours | None = None,
    engine: str | None = None,
) -> float:
    """``p(β, β', α; τ) / (L^{3/2} f_GUE(L))`` at the upper-tail scaling of (h, x, t).

    On the tensor route the factor ``e^{(4/3) L^{3/2}}`` is folded into the
    integrand exponent; the determinant route keeps the tiny tail in double
    range and applies it in log form at the end.
    """
    pt = scaled_point(h, x, t, L)
    engine = _engine(engine, n_max)
    if contours is None:
        contours = PrelimitContours.scaled(L, nodes_per_leg=24 if engine == TENSOR else 48)
    offset = 4.0 / 3.0 * L**1.5
    log_norm = -1.5 * math.log(L) - asymptotics.log_gue_density_asymp(L)
    if engine == TENSOR:
        val = _z_series(pt, n_max, contours, True, contours.z_radius, lambda z: 1.0 / (1.0 - z) ** 2, offset)
        log_norm -= offset
    else:
        val = _det_density_integral(pt, contours, n_max)
    if val.real == 0.0 or not np.isfinite(val):
        raise NonFiniteResult("scaled pre-limit density vanished or overflowed")
    ratio = math.copysign(math.exp(math.log(abs(val.real)) + log_norm), val.real)
    if not math.isfinite(ratio):
        raise NonFiniteResult("scaled ratio is not finite")
    return ratio

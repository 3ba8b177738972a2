"""The limiting density p(h, x; t), its companion p̂, and the upper-tail field.

Two evaluation routes share the contour machinery:

* ``"tensor"``: the series term by term as 2n-fold contour integrals of the
  explicit integrands ``integrand_I`` / ``integrand_I_hat``.  Cost grows like
  (nodes)^(2n), so this is practical for n <= 2 only.
* ``"fredholm"`` (default): the whole series at once as a determinant, with
  the polynomial factor produced by differentiating in (h, x, t) (see
  ``fredholm.py``).  Per-order terms come from a discrete Fourier transform
  in the order-marking variable.

The determinant route places the contours through the real saddle points of
the weight when they exist and accounts for the poles at u = -1 and v = 1 by
residue nodes.  This keeps the tails free of catastrophic cancellation.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import fredholm
from .errors import InvalidArgument, NonFiniteResult, SingularityError
from .kernels import cauchy_det_batch, h_poly_batch, log_f
from .quadrature import (
    LEFT_WEDGE,
    RIGHT_WEDGE,
    ContourSpec,
    SampledContour,
    build_wedge,
    decay_leg_length,
    integrate_tensor,
)

DEFAULT_ANCHORS = (-0.5, 0.5)
POLE_CLEARANCE = 0.25
# above this value of sqrt(nu / t) the contours go through the real saddles
SADDLE_SWITCH = 0.5
POLE_TOL = 1e-12
LAGUERRE_CUTOFF = 1e-17


@dataclass(frozen=True)
class DensityPoint:
    h: float
    x: float
    t: float

    def __post_init__(self) -> None:
        for name in ("h", "x", "t"):
            val = getattr(self, name)
            if not isinstance(val, (int, float, np.floating, np.integer)) or not math.isfinite(val):
                raise InvalidArgument(f"{name} must be a finite real number, got {val!r}")
            object.__setattr__(self, name, float(val))
        if not self.t > 0:
            raise InvalidArgument(f"t must be positive, got {self.t}")


@dataclass(frozen=True)
class SeriesConfig:
    """Numerical settings.

    ``n_max=None`` keeps every order of the series (only possible with the
    determinant engine); an integer truncates after that order.
    ``anchors=None`` picks contour anchors automatically.
    """

    n_max: int | None = None
    nodes_per_leg: int = 48
    eps: float = 1e-15
    anchors: tuple[float, float] | None = None
    engine: str = "fredholm"
    z_nodes: int = 16
    estimate_error: bool = True
    laguerre_nodes: int = 32

    def __post_init__(self) -> None:
        if self.n_max is not None and (not isinstance(self.n_max, (int, np.integer)) or self.n_max < 1):
            raise InvalidArgument(f"n_max must be a positive integer or None, got {self.n_max!r}")
        if self.nodes_per_leg < 8:
            raise InvalidArgument(f"nodes_per_leg must be >= 8, got {self.nodes_per_leg}")
        if not 0.0 < self.eps < 1.0:
            raise InvalidArgument(f"eps must lie in (0, 1), got {self.eps}")
        if self.engine not in ("fredholm", "tensor"):
            raise InvalidArgument(f"engine must be 'fredholm' or 'tensor', got {self.engine!r}")
        if self.engine == "tensor" and self.n_max is None:
            raise InvalidArgument("the tensor engine needs a finite n_max")
        if self.n_max is not None and self.n_max >= self.z_nodes:
            raise InvalidArgument("z_nodes must exceed n_max")
        if self.anchors is not None:
            a, b = self.anchors
            if not (math.isfinite(a) and math.isfinite(b) and a < b):
                raise InvalidArgument(f"anchors must be finite with left < right, got {self.anchors}")
            if abs(a + 1.0) < 1e-6 or abs(b - 1.0) < 1e-6:
                raise InvalidArgument("anchors must not sit on the poles at -1 and 1")

    def with_(self, **changes) -> "SeriesConfig":
        return SeriesConfig(**{**asdict(self), **changes})


@dataclass
class EvalResult:
    value: float
    err_estimate: float
    terms: tuple[complex, ...] = ()
    n_used: int = 0
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "err_estimate": self.err_estimate,
            "terms": [{"re": float(c.real), "im": float(c.imag)} for c in self.terms],
            "n_used": self.n_used,
            "config": dict(self.config),
        }


# ----------------------------------------------------------------- integrands


def _log_rational(u, v):
    return np.log((1.0 - u) / (1.0 + u)) + np.log((1.0 + v) / (1.0 - v))


def integrand_I(n: int, U, V, pt: DensityPoint) -> np.ndarray:
    """The n-th order integrand, vectorized over leading axes of ``U`` and ``V``.

    ``U`` and ``V`` have shape (..., n).  Collisions with the poles at u = -1,
    v = 1 or u = v raise ``SingularityError``.
    """
    U = np.asarray(U, dtype=complex)
    V = np.asarray(V, dtype=complex)
    if U.shape[-1] != n or V.shape[-1] != n:
        raise InvalidArgument(f"expected {n} entries in U and V, got {U.shape[-1]} and {V.shape[-1]}")
    if np.any(np.abs(1.0 + U) < POLE_TOL) or np.any(np.abs(1.0 - V) < POLE_TOL):
        raise SingularityError("integration variable sits on the pole at u = -1 or v = 1")
    if np.any(np.abs(U[..., :, None] - V[..., None, :]) < POLE_TOL):
        raise SingularityError("u and v nodes coincide")
    expo = (2.0 * pt.h - 2.0 * pt.t / 3.0) + np.sum(
        log_f(pt.h, pt.x, pt.t, U) - log_f(pt.h, pt.x, pt.t, V) + _log_rational(U, V), axis=-1
    )
    cd = cauchy_det_batch(U, V)
    hp = h_poly_batch(U, V, shift=(2.0, 0.0, 2.0))
    return (-1.0) ** n * np.exp(expo) * cd * cd * hp


def integrand_I_hat(n: int, U, V, pt: DensityPoint) -> np.ndarray:
    """``2 / Σ(v_i - u_i)`` times ``integrand_I``."""
    U = np.asarray(U, dtype=complex)
    V = np.asarray(V, dtype=complex)
    denom = np.sum(V - U, axis=-1)
    if np.any(np.abs(denom) < POLE_TOL):
        raise SingularityError("Σ(v - u) vanishes")
    return 2.0 / denom * integrand_I(n, U, V, pt)


def integrand_ut(n: int, U, V, pt: DensityPoint) -> np.ndarray:
    """Integrand of the upper-tail field: ``integrand_I`` without the polynomial, negated."""
    U = np.asarray(U, dtype=complex)
    V = np.asarray(V, dtype=complex)
    expo = (2.0 * pt.h - 2.0 * pt.t / 3.0) + np.sum(
        log_f(pt.h, pt.x, pt.t, U) - log_f(pt.h, pt.x, pt.t, V) + _log_rational(U, V), axis=-1
    )
    cd = cauchy_det_batch(U, V)
    return -((-1.0) ** n) * np.exp(expo) * cd * cd


# ------------------------------------------------------------------ contours


def auto_anchors(pt: DensityPoint) -> tuple[float, float]:
    """Anchors at the real saddles of the weight when they are well separated.

    The saddles of ``-t w^3/3 + x w^2 + h w`` are ``x/t ± sqrt(nu/t)`` with
    ``nu = h + x^2/t``.  Anchors are kept ``POLE_CLEARANCE`` away from the
    poles; crossing a pole is allowed (the residue node takes care of it) as
    long as the residue point stays on the correct side of the other contour.
    """
    nu = pt.h + pt.x**2 / pt.t
    c = pt.x / pt.t
    if nu <= 0 or math.sqrt(nu / pt.t) < SADDLE_SWITCH:
        if abs(c) <= DEFAULT_ANCHORS[1]:
            return DEFAULT_ANCHORS
        # complex saddles at c ± i sqrt(-nu/t): straddle their real part
        r = DEFAULT_ANCHORS[1]
    else:
        r = math.sqrt(nu / pt.t)
    a, b = c - r, c + r
    d = POLE_CLEARANCE
    if abs(a + 1.0) < d:
        a = -1.0 + d if a >= -1.0 else -1.0 - d
    if abs(b - 1.0) < d:
        b = 1.0 - d if b <= 1.0 else 1.0 + d
    if a < -1.0:
        b = max(b, -1.0 + d)
    if b > 1.0:
        a = min(a, 1.0 - d)
    if b - a < 2 * d:
        return DEFAULT_ANCHORS
    return a, b


@dataclass
class ContourPair:
    left: SampledContour
    right: SampledContour
    u_residue: bool
    v_residue: bool


def build_contours(pt: DensityPoint, cfg: SeriesConfig, nodes_per_leg: int | None = None) -> ContourPair:
    a, b = cfg.anchors if cfg.anchors is not None else auto_anchors(pt)
    m = nodes_per_leg or cfg.nodes_per_leg

    def lu(w):
        return (log_f(pt.h, pt.x, pt.t, w) + np.log((1.0 - w) / (1.0 + w))).real

    def lv(w):
        return (-log_f(pt.h, pt.x, pt.t, w) + np.log((1.0 + w) / (1.0 - w))).real

    len_u = decay_leg_length(lu, a, 2.0 * math.pi / 3.0, cfg.eps)
    len_v = decay_leg_length(lv, b, math.pi / 3.0, cfg.eps)
    left = build_wedge(ContourSpec(LEFT_WEDGE, a, len_u, m, strict=False))
    right = build_wedge(ContourSpec(RIGHT_WEDGE, b, len_v, m, strict=False))
    return ContourPair(left, right, a < -1.0, b > 1.0)


# ------------------------------------------------------------ tensor route


def _tensor_term(n: int, integrand, pt: DensityPoint, pair: ContourPair) -> complex:
    if pair.u_residue or pair.v_residue:
        raise InvalidArgument("the tensor route needs anchors with -1 < left < right < 1")

    def g(*ws):
        U = np.stack(ws[:n], axis=-1)
        V = np.stack(ws[n:], axis=-1)
        return integrand(n, U, V, pt)

    total = integrate_tensor(g, [pair.left] * n + [pair.right] * n)
    return total / math.factorial(n) ** 2


def tensor_terms(integrand, pt: DensityPoint, cfg: SeriesConfig, nodes_per_leg: int | None = None) -> list[complex]:
    cfg_t = cfg if cfg.anchors is not None else cfg.with_(anchors=DEFAULT_ANCHORS)
    pair = build_contours(pt, cfg_t, nodes_per_leg)
    return [_tensor_term(n, integrand, pt, pair) for n in range(1, cfg.n_max + 1)]


# ---------------------------------------------------------- determinant route


def _node_set(pt: DensityPoint, pair: ContourPair) -> fredholm.NodeSet:
    u, v = pair.left.points, pair.right.points
    log_wu = np.log(pair.left.weights) + np.log((1.0 - u) / (1.0 + u)) + log_f(pt.h, pt.x, pt.t, u)
    log_wv = np.log(pair.right.weights) + np.log((1.0 + v) / (1.0 - v)) - log_f(pt.h, pt.x, pt.t, v)
    return fredholm.NodeSet(
        u, log_wu, v, log_wv,
        u_star=-1.0 + 0j if pair.u_residue else None,
        v_star=1.0 + 0j if pair.v_residue else None,
    )


def _prefactors(pt: DensityPoint):
    """log prefactor and its rate function for each determinant variant.

    E = e^{2h - 2t/3}; the residue weights are 2 f(-1) and 2 / f(1); the
    product of both with E is exactly 4 and parameter independent.
    """
    h, x, t = pt.h, pt.x, pt.t
    base = (2.0 * h - 2.0 * t / 3.0, lambda d: 2.0 * d.dh - 2.0 * d.dt / 3.0)
    return {
        "d00": base,
        "du": (math.log(2.0) + h + x - t / 3.0, lambda d: base[1](d) + d.rate(-1.0)),
        "dv": (math.log(2.0) + h - x - t / 3.0, lambda d: base[1](d) - d.rate(1.0)),
        "duv": (math.log(4.0), lambda d: 0.0),
    }


def field_jets(pt: DensityPoint, pair: ContourPair, zs, directions) -> tuple[np.ndarray, list[np.ndarray]]:
    """Value of ``Φ(z) = E (det - 1) + residue terms`` and its D-relevant jets."""
    pref = _prefactors(pt)
    for log_p0, _ in pref.values():
        if log_p0 > 700.0:
            raise NonFiniteResult("prefactor overflow; parameters are out of range")
    return fredholm.field_series(_node_set(pt, pair), zs, directions, pref)


def _z_grid(cfg: SeriesConfig, need_terms: bool) -> np.ndarray:
    if not need_terms:
        return np.array([1.0 + 0j])
    m = cfg.z_nodes
    return np.exp(2j * math.pi * np.arange(m) / m)


def _terms_from_samples(samples: np.ndarray) -> np.ndarray:
    """Coefficients of z^1 .. z^(m-1) from samples on the m-th roots of unity."""
    m = len(samples)
    coeffs = np.fft.fft(samples) / m
    return coeffs[1:]


# samples of det - 1 carry ~1e-14 relative roundoff, so smaller coefficients are noise
TERM_NOISE_REL = 1e-13


def _trim_terms(terms: np.ndarray) -> np.ndarray:
    mags = np.abs(terms)
    if mags.max() == 0:
        return terms[:1]
    # the highest orders are pure DFT roundoff; their level sets the floor
    floor = 10.0 * np.median(mags[-max(2, len(mags) // 4):]) if len(mags) >= 8 else 0.0
    keep = np.nonzero(mags > max(floor, TERM_NOISE_REL * mags.max()))[0]
    if len(keep) == 0:
        return terms[:1]
    return terms[: keep[-1] + 1]


def _fredholm_density(pt: DensityPoint, cfg: SeriesConfig, need_terms: bool, nodes_per_leg: int | None = None):
    pair = build_contours(pt, cfg, nodes_per_leg)
    need = need_terms or cfg.n_max is not None
    zs = _z_grid(cfg, need)
    _, jets = field_jets(pt, pair, zs, fredholm.D_DIRECTIONS)
    samples = fredholm.apply_D_from_jets(jets)
    if not need:
        return samples[0], None
    terms = _terms_from_samples(samples)
    if cfg.n_max is not None:
        terms = terms[: cfg.n_max]
        value = terms.sum()
    else:
        # evaluating at z = 1 directly avoids the aliasing of the transform
        value = samples[0]
    return value, terms


def _fredholm_ut(pt: DensityPoint, cfg: SeriesConfig, need_terms: bool, nodes_per_leg: int | None = None):
    pair = build_contours(pt, cfg, nodes_per_leg)
    need = need_terms or cfg.n_max is not None
    zs = _z_grid(cfg, need)
    vals, _ = field_jets(pt, pair, zs, [fredholm.Direction(0, 0, 0, 0)])
    samples = -vals
    if not need:
        return samples[0], None
    terms = _terms_from_samples(samples)
    if cfg.n_max is not None:
        terms = terms[: cfg.n_max]
        return terms.sum(), terms
    return samples[0], terms


# ---------------------------------------------------------------- public API


def _config_record(pt: DensityPoint, cfg: SeriesConfig, kind: str) -> dict:
    rec = {"density": kind, "h": pt.h, "x": pt.x, "t": pt.t}
    rec.update(asdict(cfg))
    rec["anchors"] = list(cfg.anchors if cfg.anchors is not None else auto_anchors(pt))
    return rec


def _coarse_nodes(cfg: SeriesConfig) -> int:
    return max(8, int(round(0.75 * cfg.nodes_per_leg)))


def _finish(kind, pt, cfg, value, terms, coarse_value) -> EvalResult:
    if not np.isfinite(value):
        raise NonFiniteResult(f"{kind} evaluated to a non-finite value at {pt}")
    err = 0.0
    if coarse_value is not None:
        err = abs(value - coarse_value)
    if terms is not None and cfg.n_max is not None and len(terms):
        # truncation: the last kept term bounds the neglected tail when terms decay
        err += abs(terms[-1]) if len(terms) == cfg.n_max and cfg.engine == "tensor" else 0.0
    err += 4.0 * np.finfo(float).eps * abs(value)
    kept = _trim_terms(np.asarray(terms)) if terms is not None and len(terms) else np.array([])
    n_used = cfg.n_max if cfg.n_max is not None else len(kept)
    return EvalResult(
        float(value.real), float(err), tuple(complex(c) for c in kept), int(n_used), _config_record(pt, cfg, kind)
    )


def _run(kind: str, pt: DensityPoint, cfg: SeriesConfig, with_terms: bool) -> EvalResult:
    if cfg.engine == "tensor":
        integrand = {"p": integrand_I, "p_hat": integrand_I_hat, "ut": integrand_ut}[kind]
        terms = np.array(tensor_terms(integrand, pt, cfg))
        coarse = None
        if cfg.estimate_error:
            coarse = np.sum(tensor_terms(integrand, pt, cfg, _coarse_nodes(cfg)))
        if kind == "ut":
            terms = terms.copy()
        return _finish(kind, pt, cfg, terms.sum(), terms, coarse)
    if kind == "p_hat":
        return _p_hat_convolution(pt, cfg, with_terms)
    fn = _fredholm_density if kind == "p" else _fredholm_ut
    value, terms = fn(pt, cfg, with_terms)
    coarse = None
    if cfg.estimate_error:
        coarse, _ = fn(pt, cfg, False, _coarse_nodes(cfg))
        if cfg.n_max is not None:
            coarse, _ = fn(pt, cfg, True, _coarse_nodes(cfg))
    return _finish(kind, pt, cfg, value, terms, coarse)


def eval_p(pt: DensityPoint, cfg: SeriesConfig | None = None, with_terms: bool = False) -> EvalResult:
    """Evaluate p(h, x; t)."""
    return _run("p", pt, cfg or SeriesConfig(), with_terms)


def eval_p_hat(pt: DensityPoint, cfg: SeriesConfig | None = None, with_terms: bool = False) -> EvalResult:
    """Evaluate p̂(h, x; t)."""
    return _run("p_hat", pt, cfg or SeriesConfig(), with_terms)


def eval_ut_tail(pt: DensityPoint, cfg: SeriesConfig | None = None, with_terms: bool = False) -> EvalResult:
    """Evaluate the upper-tail field whose image under D is p."""
    return _run("ut", pt, cfg or SeriesConfig(), with_terms)


def _p_hat_convolution(pt: DensityPoint, cfg: SeriesConfig, with_terms: bool) -> EvalResult:
    """p̂(h) = ∫_0^∞ 2 e^{-2λ} p(h + λ) dλ by Gauss-Laguerre in y = 2λ."""

    def quad(n_lag: int, nodes: int, terms: bool):
        y, w = np.polynomial.laguerre.laggauss(n_lag)
        total = 0.0
        term_sum = None
        sub = cfg.with_(nodes_per_leg=nodes, estimate_error=False)
        prev = math.inf
        for yi, wi in zip(y, w):
            p_i, t_i = _fredholm_density(DensityPoint(pt.h + 0.5 * yi, pt.x, pt.t), sub, terms)
            contrib = wi * p_i
            total += contrib
            if t_i is not None:
                term_sum = wi * t_i if term_sum is None else term_sum + wi * t_i
            # p decays super-exponentially to the right: stop once the
            # contributions are decreasing and negligible
            if abs(contrib) < LAGUERRE_CUTOFF * abs(total) and abs(contrib) <= prev:
                break
            prev = abs(contrib)
        return total, term_sum

    value, terms = quad(cfg.laguerre_nodes, cfg.nodes_per_leg, with_terms or cfg.n_max is not None)
    if cfg.n_max is not None:
        value = terms.sum()
    coarse = None
    if cfg.estimate_error:
        coarse, cterms = quad(max(8, int(round(0.75 * cfg.laguerre_nodes))), _coarse_nodes(cfg), cfg.n_max is not None)
        if cfg.n_max is not None:
            coarse = cterms.sum()
    return _finish("p_hat", pt, cfg, value, terms, coarse)


def apply_D_fd(F: Callable[[float, float, float], float], pt: DensityPoint, step: float) -> float:
    """Finite-difference ``∂h⁴/12 + ∂x²/4 + ∂h∂t`` of ``F`` at ``pt``.

    Central differences with step ``step`` in every variable.
    """
    if not step > 0:
        raise InvalidArgument(f"step must be positive, got {step}")
    if pt.t - 2 * step <= 0:
        raise InvalidArgument(f"need t - 2*step > 0, got t={pt.t}, step={step}")
    h, x, t, d = pt.h, pt.x, pt.t, step
    f0 = F(h, x, t)
    d4h = (F(h + 2 * d, x, t) - 4 * F(h + d, x, t) + 6 * f0 - 4 * F(h - d, x, t) + F(h - 2 * d, x, t)) / d**4
    d2x = (F(h, x + d, t) - 2 * f0 + F(h, x - d, t)) / d**2
    dht = (F(h + d, x, t + d) - F(h + d, x, t - d) - F(h - d, x, t + d) + F(h - d, x, t - d)) / (4 * d**2)
    return d4h / 12.0 + d2x / 4.0 + dht

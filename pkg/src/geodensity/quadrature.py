"""Integration contours and tensor-product quadrature over products of contours.

Every contour integral in this package is written as ``∫ g(w) dw/(2πi)``; the
sampled contours therefore carry weights that already contain the local
derivative of the parameterization and the ``1/(2πi)`` factor, so an integral
is just ``sum(g(points) * weights)``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidArgument, NonFiniteResult

LEFT_WEDGE = "left-wedge"
RIGHT_WEDGE = "right-wedge"
CIRCLE = "circle"

WEDGE_ANGLES = {LEFT_WEDGE: 2.0 * math.pi / 3.0, RIGHT_WEDGE: math.pi / 3.0}

TWO_PI_I = 2j * math.pi

# fixed reduction granularity; results do not depend on the thread count
REDUCTION_CHUNK = 1024
_BLOCK_CHUNKS = 256

SAFETY_FACTOR = 1.25


def thread_count() -> int:
    """Worker cap taken from ``GEODENSITY_THREADS`` (default 1)."""
    raw = os.environ.get("GEODENSITY_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise InvalidArgument(f"GEODENSITY_THREADS must be a positive integer, got {raw!r}")
    if n < 1:
        raise InvalidArgument(f"GEODENSITY_THREADS must be a positive integer, got {raw!r}")
    return n


@dataclass(frozen=True)
class ContourSpec:
    """Parameters of a wedge (two rays from a real anchor) or a circle.

    For wedges ``radius`` is the truncation length of each leg; for circles it
    is the circle radius and ``nodes_per_leg`` is the total node count.
    Left wedges must be anchored in (-1, 0) and right wedges in (0, 1) unless
    ``strict=False``; callers that move a wedge across a pole at -1 or 1 are
    responsible for the residue it then picks up.
    """

    kind: str
    anchor: complex
    radius: float
    nodes_per_leg: int
    strict: bool = True

    def __post_init__(self) -> None:
        if self.kind not in (LEFT_WEDGE, RIGHT_WEDGE, CIRCLE):
            raise InvalidArgument(f"unknown contour kind {self.kind!r}")
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise InvalidArgument(f"radius must be positive and finite, got {self.radius}")
        if self.kind == CIRCLE:
            if self.nodes_per_leg < 4:
                raise InvalidArgument("a circle needs at least 4 nodes")
            return
        if self.nodes_per_leg < 2:
            raise InvalidArgument("nodes_per_leg must be >= 2")
        a = complex(self.anchor)
        if a.imag != 0.0 or not math.isfinite(a.real):
            raise InvalidArgument(f"wedge anchor must be a finite real number, got {self.anchor}")
        if self.strict:
            if self.kind == LEFT_WEDGE and not (-1.0 < a.real < 0.0):
                raise InvalidArgument(f"left-wedge anchor must lie in (-1, 0), got {a.real}")
            if self.kind == RIGHT_WEDGE and not (0.0 < a.real < 1.0):
                raise InvalidArgument(f"right-wedge anchor must lie in (0, 1), got {a.real}")

    @property
    def angle(self) -> float:
        return WEDGE_ANGLES.get(self.kind, 0.0)


@dataclass(frozen=True)
class SampledContour:
    points: np.ndarray
    weights: np.ndarray
    spec: ContourSpec | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        pts = np.array(self.points, dtype=complex)
        wts = np.array(self.weights, dtype=complex)
        if pts.shape != wts.shape or pts.ndim != 1:
            raise InvalidArgument("points and weights must be 1-D arrays of equal length")
        pts.setflags(write=False)
        wts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)

    def __len__(self) -> int:
        return len(self.points)

    def reversed(self) -> "SampledContour":
        return SampledContour(self.points[::-1], -self.weights[::-1], self.spec)

    def integrate(self, func: Callable[[np.ndarray], np.ndarray]) -> complex:
        return integrate_tensor(func, [self])


def gauss_legendre_nodes(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre rule with ``m`` points mapped to [0, 1]."""
    if not isinstance(m, (int, np.integer)) or m < 1:
        raise InvalidArgument(f"m must be a positive integer, got {m!r}")
    x, w = np.polynomial.legendre.leggauss(int(m))
    return 0.5 * (x + 1.0), 0.5 * w


def _panel_breaks(radius: float, n_panels: int, ratio: float) -> np.ndarray:
    # geometric refinement toward r = 0
    inner = radius * ratio ** np.arange(n_panels - 1, 0, -1)
    return np.concatenate(([0.0], inner, [radius]))


def leg_rule(radius: float, nodes: int, panel_size: int = 16, ratio: float = 0.6) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule on (0, radius] with panels graded toward 0."""
    n_panels = max(1, int(round(nodes / panel_size)))
    n_panels = min(n_panels, nodes // 2) or 1
    breaks = _panel_breaks(radius, n_panels, ratio)
    counts = np.full(n_panels, nodes // n_panels)
    counts[: nodes - counts.sum()] += 1
    rs, ws = [], []
    for a, b, m in zip(breaks[:-1], breaks[1:], counts):
        x, w = gauss_legendre_nodes(int(m))
        rs.append(a + (b - a) * x)
        ws.append((b - a) * w)
    return np.concatenate(rs), np.concatenate(ws)


def build_wedge(spec: ContourSpec, leg_lengths: tuple[float, float] | None = None) -> SampledContour:
    """Discretize ``anchor + r e^{∓iθ}``, oriented from the lower leg to the upper leg.

    ``leg_lengths`` optionally overrides ``spec.radius`` separately for the
    lower and upper legs.
    """
    if spec.kind not in WEDGE_ANGLES:
        raise InvalidArgument(f"build_wedge needs a wedge spec, got {spec.kind!r}")
    theta = spec.angle
    anchor = complex(spec.anchor).real
    lo_len, up_len = leg_lengths or (spec.radius, spec.radius)
    r_lo, w_lo = leg_rule(lo_len, spec.nodes_per_leg)
    r_up, w_up = leg_rule(up_len, spec.nodes_per_leg)
    down = np.exp(-1j * theta)
    up = np.exp(1j * theta)
    # lower leg is traversed inward: w = anchor + r e^{-iθ}, dw = -e^{-iθ} dr
    lower_pts = (anchor + r_lo * down)[::-1]
    lower_wts = (-down * w_lo / TWO_PI_I)[::-1]
    upper_pts = anchor + r_up * up
    upper_wts = up * w_up / TWO_PI_I
    return SampledContour(
        np.concatenate((lower_pts, upper_pts)),
        np.concatenate((lower_wts, upper_wts)),
        spec,
    )


def build_circle(center: complex, radius: float, m: int) -> SampledContour:
    """Counterclockwise trapezoid rule on a circle; weights include 1/(2πi)."""
    if not radius > 0:
        raise InvalidArgument(f"circle radius must be positive, got {radius}")
    spec = ContourSpec(CIRCLE, complex(center), float(radius), int(m))
    phi = 2.0 * math.pi * np.arange(m) / m
    offsets = radius * np.exp(1j * phi)
    # dz/(2πi) = i (z - c) dφ / (2πi) = (z - c) dφ / (2π), dφ = 2π/m
    return SampledContour(center + offsets, offsets / m, spec)


def cubic_decay_radius(t: float, eps: float) -> float:
    """Radius where ``exp(-t R^3 / 3)`` reaches ``eps``."""
    return (3.0 * math.log(1.0 / eps) / t) ** (1.0 / 3.0)


def choose_truncation_radius(t: float, h: float, x: float, eps: float) -> float:
    """Leg length after which ``|exp(-t w^3/3 + x w^2 + h w)|`` is below ``eps``.

    The cubic decay bound is padded by the scale at which the quadratic and
    linear terms stop competing with it, then multiplied by a safety factor.
    """
    if not t > 0:
        raise InvalidArgument(f"t must be positive, got {t}")
    if not 0.0 < eps < 1.0:
        raise InvalidArgument(f"eps must lie in (0, 1), got {eps}")
    margin = max(abs(x) / t, math.sqrt(abs(h) / t))
    return SAFETY_FACTOR * (cubic_decay_radius(t, eps) + margin)


def decay_leg_length(
    log_mag: Callable[[np.ndarray], np.ndarray],
    anchor: float,
    angle: float,
    eps: float,
    r_max: float = 60.0,
    samples: int = 6000,
) -> float:
    """Length of the ray ``anchor + r e^{i angle}`` past which ``log_mag`` has
    dropped ``log(1/eps)`` below its running maximum for good.

    ``log_mag`` returns the log-magnitude of the integrand along the ray; it
    must eventually decrease (cubic decay guarantees this for our weights).
    """
    r = np.linspace(0.0, r_max, samples)
    g = np.asarray(log_mag(anchor + r * np.exp(1j * angle)), dtype=float)
    peak = np.maximum.accumulate(g)
    cut = peak[-1] - math.log(1.0 / eps)
    above = np.nonzero(g >= cut)[0]
    if len(above) == 0:
        return float(r[1])
    i = above[-1]
    if i >= samples - 1:
        raise NonFiniteResult("integrand does not decay along the contour within the scan range")
    # interpolate the last crossing so the length varies continuously with the parameters
    frac = (g[i] - cut) / (g[i] - g[i + 1])
    return float(r[i] + frac * (r[i + 1] - r[i])) * 1.05


def _tuple_block(grids: Sequence[np.ndarray], start: int, stop: int, shape: tuple[int, ...]) -> list[np.ndarray]:
    idx = np.unravel_index(np.arange(start, stop), shape)
    return [g[i] for g, i in zip(grids, idx)]


def integrate_tensor(
    integrand: Callable[..., np.ndarray],
    contours: Sequence[SampledContour],
    threads: int | None = None,
) -> complex:
    """Sum ``integrand(w_1, ..., w_k) * Π weights`` over all node tuples.

    ``integrand`` receives k equally shaped complex arrays (one entry per
    tuple) and must return an array of the same shape.  Tuples are visited in
    C order and reduced in fixed chunks of ``REDUCTION_CHUNK``; the blocks may
    be evaluated by several threads but the reduction order never changes, so
    the result is bit-reproducible.
    """
    if len(contours) == 0:
        raise InvalidArgument("integrate_tensor needs at least one contour")
    shape = tuple(len(c) for c in contours)
    total = math.prod(shape)
    points = [c.points for c in contours]
    weights = [c.weights for c in contours]
    block = REDUCTION_CHUNK * _BLOCK_CHUNKS
    starts = list(range(0, total, block))

    def run(start: int) -> np.ndarray:
        stop = min(start + block, total)
        args = _tuple_block(points, start, stop, shape)
        wts = _tuple_block(weights, start, stop, shape)
        vals = np.asarray(integrand(*args), dtype=complex)
        vals = vals * np.prod(np.stack(wts), axis=0)
        if not np.all(np.isfinite(vals)):
            raise NonFiniteResult("integrand produced non-finite values on the contour nodes")
        pad = (-len(vals)) % REDUCTION_CHUNK
        if pad:
            vals = np.concatenate((vals, np.zeros(pad, dtype=complex)))
        return vals.reshape(-1, REDUCTION_CHUNK).sum(axis=1)

    workers = thread_count() if threads is None else threads
    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(run, starts))
    else:
        partials = [run(s) for s in starts]
    chunks = np.concatenate(partials)
    return complex(math.fsum(chunks.real), math.fsum(chunks.imag))

"""Algebraic building blocks of the contour integrands.

All functions accept scalars or sequences of complex numbers.  ``cauchy_det``
and the power sums also have ``*_batch`` variants that work on arrays whose
last axis enumerates the vector entries; these are what the vectorized
integrands use.
"""

from __future__ import annotations

import cmath
import math
from typing import Sequence

import numpy as np

from .errors import InvalidArgument, SingularityError

ComplexVector = Sequence[complex]

# |w_i - w'_j| below this (times 1 + |w_i|) counts as a collision
COINCIDENCE_TOL = 1e-13
_LOG_RANGE = (math.log(1e-150), math.log(1e150))


def vec_concat(a: ComplexVector, b: ComplexVector) -> tuple[complex, ...]:
    """The ⊔ operation: ``(a_1, ..., a_n, b_1, ..., b_m)``."""
    return tuple(complex(v) for v in a) + tuple(complex(v) for v in b)


def cauchy_det(W: ComplexVector, Wp: ComplexVector) -> complex:
    """``det[1/(w_i - w'_j)]`` via the closed product formula.

    Factors are accumulated as magnitudes in log space whenever any of them
    leaves ``[1e-150, 1e150]``.
    """
    w = [complex(v) for v in W]
    wp = [complex(v) for v in Wp]
    n = len(w)
    if n != len(wp):
        raise InvalidArgument(f"Cauchy determinant needs equal dimensions, got {n} and {len(wp)}")
    if n == 0:
        return 1.0 + 0.0j
    num = [w[i] - w[j] for i in range(n) for j in range(i + 1, n)]
    num += [wp[i] - wp[j] for i in range(n) for j in range(i + 1, n)]
    den = []
    for wi in w:
        for wj in wp:
            d = wi - wj
            if abs(d) < COINCIDENCE_TOL * (1.0 + abs(wi)):
                raise SingularityError(f"w = {wi} coincides with w' = {wj}")
            den.append(d)
    sign = -1.0 if (n * (n - 1) // 2) % 2 else 1.0
    factors = num + den
    if any(f == 0 for f in num):
        return 0.0j
    logs = [math.log(abs(f)) for f in factors]
    if min(logs) < _LOG_RANGE[0] or max(logs) > _LOG_RANGE[1]:
        log_mag = sum(logs[: len(num)]) - sum(logs[len(num):])
        phase = sum(cmath.phase(f) for f in num) - sum(cmath.phase(f) for f in den)
        return sign * cmath.exp(complex(log_mag, phase))
    val = complex(sign)
    for f in num:
        val *= f
    for f in den:
        val /= f
    return val


def cauchy_det_batch(W: np.ndarray, Wp: np.ndarray) -> np.ndarray:
    """Vectorized product formula; the last axis holds the vector entries.

    No log-space fallback and no collision check: callers evaluate it on
    disjoint contours.
    """
    W = np.asarray(W, dtype=complex)
    Wp = np.asarray(Wp, dtype=complex)
    n = W.shape[-1]
    if Wp.shape[-1] != n:
        raise InvalidArgument(f"Cauchy determinant needs equal dimensions, got {n} and {Wp.shape[-1]}")
    shape = np.broadcast_shapes(W.shape[:-1], Wp.shape[:-1])
    val = np.full(shape, -1.0 + 0j if (n * (n - 1) // 2) % 2 else 1.0 + 0j)
    for i in range(n):
        for j in range(i + 1, n):
            val = val * (W[..., i] - W[..., j]) * (Wp[..., i] - Wp[..., j])
    for i in range(n):
        for j in range(n):
            val = val / (W[..., i] - Wp[..., j])
    return val


def s_k(W: ComplexVector, Wp: ComplexVector, k: int) -> complex:
    """Power-sum difference ``Σ w_i^k - Σ w'_i^k`` for k in {1, 2, 3}."""
    if k not in (1, 2, 3):
        raise InvalidArgument(f"k must be 1, 2 or 3, got {k!r}")
    return sum(complex(w) ** k for w in W) - sum(complex(w) ** k for w in Wp)


def h_from_sums(s1, s2, s3):
    return s1**4 / 12.0 + s2**2 / 4.0 - s1 * s3 / 3.0


def h_poly(W: ComplexVector, Wp: ComplexVector) -> complex:
    """``S_1^4/12 + S_2^2/4 - S_1 S_3/3`` of the power-sum differences."""
    return h_from_sums(s_k(W, Wp, 1), s_k(W, Wp, 2), s_k(W, Wp, 3))


def h_poly_batch(W: np.ndarray, Wp: np.ndarray, shift: tuple[complex, complex, complex] = (0, 0, 0)) -> np.ndarray:
    """Vectorized ``h_poly``; ``shift`` adds constant offsets to S_1, S_2, S_3.

    The offsets are how appended constant entries (such as ``⊔ (1)`` and
    ``⊔ (-1)``) enter without materializing longer vectors.
    """
    W = np.asarray(W, dtype=complex)
    Wp = np.asarray(Wp, dtype=complex)
    s1 = W.sum(-1) - Wp.sum(-1) + shift[0]
    s2 = (W**2).sum(-1) - (Wp**2).sum(-1) + shift[1]
    s3 = (W**3).sum(-1) - (Wp**3).sum(-1) + shift[2]
    return h_from_sums(s1, s2, s3)


def log_f(h: float, x: float, t: float, w):
    """Exponent of ``f_{h,x;t}(w) = exp(-t w^3/3 + x w^2 + h w)``."""
    return -t * w**3 / 3.0 + x * w**2 + h * w

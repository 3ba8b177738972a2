"""Determinant form of the contour-integral series and its parameter jets.

For a discretization of the u- and v-contours the series

    Σ_n (-1)^n / (n!)^2  Σ_{tuples} C(U;V)^2  Π w_u(u_i) w_v(v_i)

equals ``det(I - A A^T) - 1`` (Cauchy-Binet) with ``A[a, b] = sqrt(w_u[a]
w_v[b]) / (u_a - v_b)``.  We work with the block matrix

    Z = [[I, z A], [A^T, I]],     det Z = det(I - z A A^T),

where the formal variable z marks the series order.  Moving a parameter
(h, x, t) along a direction d multiplies each weight by ``exp(s λ)`` with a
node-dependent rate λ; writing ``Z(s) = e^{sΛ/2} (O + I e^{-sΛ}) e^{sΛ/2}``
leaves only a diagonal that depends on s, so the Taylor coefficients of
``log det Z(s)`` need one inverse and at most one extra matrix product.

Residues picked up when a contour is moved across the pole of the weight at
u = -1 (or v = 1) enter as one extra node whose weight is the residue.
Because each node appears at most once in any term, ``det Z`` is affine in
that weight; the coefficients are handled by Schur complements onto the
contour block (see ``field_series``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteResult

MAX_ORDER = 4


@dataclass(frozen=True)
class Direction:
    """Unit direction in (h, x, t) parameter space and the Taylor order wanted."""

    dh: float
    dx: float
    dt: float
    order: int

    def rate(self, w):
        # derivative of log f_{h,x;t}(w) along the direction
        return self.dh * w + self.dx * w**2 - self.dt * w**3 / 3.0


D_DIRECTIONS = (
    Direction(1.0, 0.0, 0.0, 4),
    Direction(0.0, 1.0, 0.0, 2),
    Direction(1.0, 0.0, 1.0, 2),
    Direction(1.0, 0.0, -1.0, 2),
)


def apply_D_from_jets(jets: list[np.ndarray]) -> np.ndarray:
    """Combine Taylor coefficients along ``D_DIRECTIONS`` into D = ∂h⁴/12 + ∂x²/4 + ∂h∂t."""
    c_h, c_x, c_plus, c_minus = jets
    # ∂h^4 = 24 c4 ; ∂x^2 = 2 c2 ; ∂h∂t = (c2[h+t] - c2[h-t]) / 2
    return 2.0 * c_h[..., 4] + 0.5 * c_x[..., 2] + 0.5 * (c_plus[..., 2] - c_minus[..., 2])


def log1p_complex(w) -> np.ndarray:
    """log(1 + w) keeping full relative accuracy of the real part for small w.

    numpy's complex log1p loses Re when |w| is far below 1.
    """
    w = np.asarray(w, dtype=complex)
    x, y = w.real, w.imag
    with np.errstate(divide="ignore"):
        # w = -1 gives -inf, which is the right limit for det = 0
        return 0.5 * np.log1p(2.0 * x + x * x + y * y) + 1j * np.arctan2(y, 1.0 + x)


def _series_exp(L: np.ndarray) -> np.ndarray:
    """exp of a power series with zero constant term; last axis = order."""
    K = L.shape[-1] - 1
    E = np.zeros_like(L)
    E[..., 0] = 1.0
    for k in range(1, K + 1):
        acc = 0.0
        for j in range(1, k + 1):
            acc = acc + j * L[..., j] * E[..., k - j]
        E[..., k] = acc / k
    return E


def _logdet_jet(G: np.ndarray, lam: np.ndarray, order: int) -> np.ndarray:
    """Taylor coefficients of ``log det(I' + e^{sΛ} O) - log det(I' + O)``.

    With ``Y = (I' + O)^{-1}`` the series terms are ``X_k = Y Λ^k O / k!``.
    Every trace below is rewritten through ``G = O Y`` so that it scales with
    the (possibly tiny) kernel and no large cancelling sums appear.
    """
    L = np.zeros(G.shape[:-2] + (order + 1,), dtype=complex)
    if order == 0:
        return L
    if order > MAX_ORDER:
        raise ValueError(f"jets are implemented up to order {MAX_ORDER}")
    lp = [None] + [lam**k / math.factorial(k) for k in range(1, order + 1)]
    Gdiag = np.einsum("...ii->...i", G)
    L[..., 1] = Gdiag @ lp[1]
    if order >= 2:
        S = G * np.swapaxes(G, -1, -2)

        def q(i, j):
            # tr(X_i X_j)
            return np.einsum("...pq,p,q->...", S, lp[i], lp[j])

        L[..., 2] = Gdiag @ lp[2] - 0.5 * q(1, 1)
    if order >= 3:
        W = lam[:, None] * G  # Λ G
        W2 = W @ W
        tr_w3 = np.sum(W2 * np.swapaxes(W, -1, -2), axis=(-1, -2))
        L[..., 3] = Gdiag @ lp[3] - q(1, 2) + tr_w3 / 3.0
    if order >= 4:
        # tr(X_1^2 X_2) = tr(ΛG ΛG Λ^2 G) / 2
        t112 = np.einsum("...pq,q,...qp->...", W2, lam**2, G) / 2.0
        tr_w4 = np.sum(W2 * np.swapaxes(W2, -1, -2), axis=(-1, -2))
        L[..., 4] = Gdiag @ lp[4] - q(1, 3) - 0.5 * q(2, 2) + t112 - 0.25 * tr_w4
    return L


@dataclass
class NodeSet:
    """Discretized u- and v-measures plus optional residue nodes.

    ``log_wu``/``log_wv`` are complex logs of the full node weights at the
    base parameters (quadrature weight, rational factor, f or 1/f).  The
    residue nodes carry unit weight here; their weights are reinstated by the
    caller through the affine expansion.
    """

    u: np.ndarray
    log_wu: np.ndarray
    v: np.ndarray
    log_wv: np.ndarray
    u_star: complex | None = None
    v_star: complex | None = None


def series_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Truncated Cauchy product of two batched series (last axis = order)."""
    K = a.shape[-1] - 1
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape), dtype=complex)
    for k in range(K + 1):
        for j in range(k + 1):
            out[..., k] += a[..., j] * b[..., k - j]
    return out


def prefactor_series(log_p0: float, rate: float, order: int) -> np.ndarray:
    k = np.arange(order + 1)
    return math.exp(log_p0) * rate**k / np.array([math.factorial(int(i)) for i in k])


@dataclass
class _Blocks:
    A: np.ndarray  # contour kernel, N x M
    alpha: np.ndarray | None  # column of the v residue node against u nodes
    beta: np.ndarray | None  # row of the u residue node against v nodes
    Z: np.ndarray  # (nz, n, n) contour block
    Y: np.ndarray  # its inverse
    O: np.ndarray  # Z - I
    G: np.ndarray  # O @ Y
    logdet: np.ndarray  # (nz,)


# kernel entry between the two residue nodes, 1 / (u* - v*)
PAIR_ENTRY = -0.5


def _blocks(nodes: NodeSet, zs: np.ndarray) -> _Blocks:
    u, v = nodes.u, nodes.v
    hu, hv = 0.5 * nodes.log_wu, 0.5 * nodes.log_wv
    # combine the exponents before a single exponentiation per entry
    A = np.exp(hu[:, None] + hv[None, :]) / (u[:, None] - v[None, :])
    alpha = np.exp(hu) / (u - nodes.v_star) if nodes.v_star is not None else None
    beta = np.exp(hv) / (nodes.u_star - v) if nodes.u_star is not None else None
    for arr in (A, alpha, beta):
        if arr is not None and not np.all(np.isfinite(arr)):
            raise NonFiniteResult("kernel entries overflowed")
    N, M = A.shape
    n = N + M
    Z = np.zeros((len(zs), n, n), dtype=complex)
    Z[:, :N, N:] = zs[:, None, None] * A[None]
    Z[:, N:, :N] = A.T[None]
    O = Z.copy()
    idx = np.arange(n)
    Z[:, idx, idx] += 1.0
    Y = np.linalg.inv(Z)
    if not np.all(np.isfinite(Y)):
        raise NonFiniteResult("determinant matrix is singular")
    # det Z = det(I - z A A^T); eigenvalues keep det - 1 accurate when it is tiny
    mu = np.linalg.eigvals(A @ A.T)
    logdet = np.sum(log1p_complex(-zs[:, None] * mu[None, :]), axis=-1)
    return _Blocks(A, alpha, beta, Z, Y, O, O @ Y, logdet)


def _resolvent_pair(blk: _Blocks, lam: np.ndarray, c: np.ndarray, b: np.ndarray, order: int) -> np.ndarray:
    """Series of ``c^T N(s)^{-1} O e^{sΛ} b`` with ``N(s) = e^{-sΛ} + O``."""
    nd = [None] + [(-lam) ** k / math.factorial(k) for k in range(1, order + 1)]
    ell = [np.einsum("zp,zpq->zq", c, blk.Y)]
    for k in range(1, order + 1):
        acc = sum(ell[k - j] * nd[j] for j in range(1, k + 1))
        ell.append(-np.einsum("zp,zpq->zq", acc, blk.Y))
    r = [np.einsum("zpq,zq->zp", blk.O, b * (lam**m / math.factorial(m))) for m in range(order + 1)]
    out = np.zeros((c.shape[0], order + 1), dtype=complex)
    for k in range(order + 1):
        for j in range(k + 1):
            out[:, k] += np.sum(ell[j] * r[k - j], axis=-1)
    return out


def field_series(nodes: NodeSet, zs, directions, prefactors: dict):
    """Value and D-relevant jets of the discretized field

        Φ(z) = E (det - 1) + E ω_u d_u + E ω_v d_v + E ω_u ω_v d_uv,

    where ``d_u``, ``d_v``, ``d_uv`` are the determinants with the residue
    nodes attached.  ``prefactors`` maps "d00", "du", "dv", "duv" to
    ``(log E ω, rate(direction))``.

    Each determinant with residue nodes is reduced by a Schur complement to
    the contour block.  The first-order pairings of a residue node with
    contour nodes, and the pair of residue nodes, are separated out
    analytically: they are annihilated by D, and keeping them inside the
    determinant would bury the tails under rounding error.  Returned jets
    therefore describe ``Φ`` minus those terms, with constant parts dropped;
    they are only meaningful after D is applied.  The returned value is the
    full ``Φ(z)``.
    """
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    blk = _blocks(nodes, zs)
    N, M = blk.A.shape
    nz = len(zs)
    dc0 = np.exp(blk.logdet)
    dcm1 = np.expm1(blk.logdet)
    has_u = blk.beta is not None
    has_v = blk.alpha is not None
    zero_u, zero_v = np.zeros(N), np.zeros(M)
    if has_u:
        b_u = np.broadcast_to(np.concatenate((zero_u, blk.beta)), (nz, N + M))
        c_u = zs[:, None] * b_u
    if has_v:
        c_v = np.broadcast_to(np.concatenate((blk.alpha, zero_v)), (nz, N + M))
        b_v = zs[:, None] * c_v
    c = PAIR_ENTRY

    def assemble(order: int, lam: np.ndarray, log_rate):
        """Series of the four pieces (without prefactors), order 0..order."""
        L = _logdet_jet(blk.G, lam, order)
        ex = _series_exp(L)
        dc = dc0[:, None] * ex
        dm = dc.copy()
        dm[:, 0] = dcm1
        pieces = {"d00": dm}
        kk = np.arange(order + 1)
        fact = np.array([math.factorial(int(i)) for i in kk])
        g = {}
        if has_u:
            lam_v = lam[N:]
            q_uu = zs[:, None] * np.sum(blk.beta[None, :, None] ** 2 * lam_v[None, :, None] ** kk / fact, axis=1)
            rho_uu = _resolvent_pair(blk, lam, c_u, b_u, order)
            pieces["du"] = -series_mul(dm, q_uu) + series_mul(dc, rho_uu)
            g["uu"] = q_uu - rho_uu
        if has_v:
            lam_u = lam[:N]
            q_vv = zs[:, None] * np.sum(blk.alpha[None, :, None] ** 2 * lam_u[None, :, None] ** kk / fact, axis=1)
            rho_vv = _resolvent_pair(blk, lam, c_v, b_v, order)
            pieces["dv"] = -series_mul(dm, q_vv) + series_mul(dc, rho_vv)
            g["vv"] = q_vv - rho_vv
        if has_u and has_v:
            g_uv = -_resolvent_pair(blk, lam, c_u, b_v, order)
            g_vu = -_resolvent_pair(blk, lam, c_v, b_u, order)
            inner = series_mul(g["uu"], g["vv"]) + c * zs[:, None] * g_vu + c * g_uv - series_mul(g_uv, g_vu)
            pieces["duv"] = series_mul(dc, inner) - dm * zs[:, None] * (c * c)
        return pieces, (q_uu[:, 0] if has_u else 0.0), (q_vv[:, 0] if has_v else 0.0)

    # value of the field at the base parameters
    lam0 = np.zeros(N + M)
    pieces0, q_uu0, q_vv0 = assemble(0, lam0, None)
    value = np.zeros(nz, dtype=complex)
    for name, ser in pieces0.items():
        value += math.exp(prefactors[name][0]) * ser[:, 0]
    if has_u:
        value -= math.exp(prefactors["du"][0]) * q_uu0
    if has_v:
        value -= math.exp(prefactors["dv"][0]) * q_vv0
    if has_u and has_v:
        value -= zs

    jets = []
    for d in directions:
        if d.order == 0:
            jets.append(np.zeros((nz, 1), dtype=complex))
            continue
        lam = np.concatenate((d.rate(nodes.u), -d.rate(nodes.v)))
        pieces, _, _ = assemble(d.order, lam, None)
        total = np.zeros((nz, d.order + 1), dtype=complex)
        for name, ser in pieces.items():
            ser = ser.copy()
            # prefactor times a constant is annihilated by D
            ser[:, 0] = 0.0
            log_p0, rate = prefactors[name]
            total += series_mul(ser, prefactor_series(log_p0, rate(d), d.order)[None, :])
        jets.append(total)
    return value, jets

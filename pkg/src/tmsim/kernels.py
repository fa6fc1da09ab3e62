"""Compiled inner loops: fused stencil gathers and per-cell geometry.

These kernels mirror the reference algebra in ``geometry.py`` cell by cell;
tests cross-check the two paths.  Everything is single-threaded and runs in
a fixed order, so results are bit-reproducible.  The ``*_raw`` variants are
dtype-generic (they also compile for complex128, which the diagnostics use
for algebraic directional derivatives); the checked variant validates the
timelike/coercivity preconditions and reports the offending cell.

Status codes returned by the checked kernel:
    0 = OK, 1 = coercivity margin <= 0, 2 = spacelike degeneration,
    3 = singular time-time block.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# degeneracy thresholds duplicated from geometry.py (kernels cannot import
# python-level constants cheaply); keep in sync
_DEG_TOL = 1e-14
_SING_TOL = 1e-14

STATUS_OK = 0
STATUS_COERCIVITY = 1
STATUS_SPACELIKE = 2
STATUS_SINGULAR_BLOCK = 3


def wrap_table(N: int) -> np.ndarray:
    """Neighbor index rows for offsets (-2, -1, +1, +2) on a periodic axis."""
    idx = np.arange(N)
    return np.stack([(idx + off) % N for off in (-2, -1, 1, 2)]).astype(np.int64)


def sym2_pairs(dim: int):
    """Packed ordering of symmetric index pairs (a <= b)."""
    return [(a, b) for a in range(dim) for b in range(a, dim)]


def sym2_index(dim: int) -> np.ndarray:
    tab = np.zeros((dim, dim), dtype=np.int64)
    for p, (a, b) in enumerate(sym2_pairs(dim)):
        tab[a, b] = tab[b, a] = p
    return tab


def sym3_triples(dim: int):
    return [(a, b, c) for a in range(dim) for b in range(a, dim) for c in range(b, dim)]


def sym3_index(dim: int) -> np.ndarray:
    tab = np.zeros((dim, dim, dim), dtype=np.int64)
    for p, (a, b, c) in enumerate(sym3_triples(dim)):
        for perm in ((a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)):
            tab[perm] = p
    return tab


# ---------------------------------------------------------------------------
# Stencil kernels.  Weights of the 4th-order first derivative at offsets
# (-2,-1,+1,+2) are (1,-8,8,-1)/12; the second derivative at (-2..2) is
# (-1,16,-30,16,-1)/12.


@njit(cache=True, nogil=True)
def derivs_uw_2d(u, w, dx, wrap, du, d2u, dw):
    """First+second derivatives of u and first derivatives of w (n = 2).

    u, w: (q, N, N); du, dw: (2, q, N, N); d2u packed (3, q, N, N) with
    pair order (00, 01, 11).
    """
    q, N, _ = u.shape
    c1 = 1.0 / (12.0 * dx)
    c2 = 1.0 / (12.0 * dx * dx)
    cm = 1.0 / (144.0 * dx * dx)
    for I in range(q):
        for i in range(N):
            im2 = wrap[0, i]; im1 = wrap[1, i]; ip1 = wrap[2, i]; ip2 = wrap[3, i]
            for j in range(N):
                jm2 = wrap[0, j]; jm1 = wrap[1, j]; jp1 = wrap[2, j]; jp2 = wrap[3, j]
                u0 = u[I, i, j]
                ua = u[I, im2, j]; ub = u[I, im1, j]; uc = u[I, ip1, j]; ud = u[I, ip2, j]
                ue = u[I, i, jm2]; uf = u[I, i, jm1]; ug = u[I, i, jp1]; uh = u[I, i, jp2]
                du[0, I, i, j] = (8.0 * (uc - ub) + (ua - ud)) * c1
                du[1, I, i, j] = (8.0 * (ug - uf) + (ue - uh)) * c1
                d2u[0, I, i, j] = (16.0 * (ub + uc) - (ua + ud) - 30.0 * u0) * c2
                d2u[2, I, i, j] = (16.0 * (uf + ug) - (ue + uh) - 30.0 * u0) * c2
                m = 0.0
                m += 1.0 * (8.0 * (u[I, im2, jp1] - u[I, im2, jm1]) + (u[I, im2, jm2] - u[I, im2, jp2]))
                m -= 8.0 * (8.0 * (u[I, im1, jp1] - u[I, im1, jm1]) + (u[I, im1, jm2] - u[I, im1, jp2]))
                m += 8.0 * (8.0 * (u[I, ip1, jp1] - u[I, ip1, jm1]) + (u[I, ip1, jm2] - u[I, ip1, jp2]))
                m -= 1.0 * (8.0 * (u[I, ip2, jp1] - u[I, ip2, jm1]) + (u[I, ip2, jm2] - u[I, ip2, jp2]))
                d2u[1, I, i, j] = m * cm
                wa = w[I, im2, j]; wb = w[I, im1, j]; wc = w[I, ip1, j]; wd = w[I, ip2, j]
                we = w[I, i, jm2]; wf = w[I, i, jm1]; wg = w[I, i, jp1]; wh = w[I, i, jp2]
                dw[0, I, i, j] = (8.0 * (wc - wb) + (wa - wd)) * c1
                dw[1, I, i, j] = (8.0 * (wg - wf) + (we - wh)) * c1


@njit(cache=True, nogil=True)
def derivs_uw_3d(u, w, dx, wrap, du, d2u, dw):
    """Same as derivs_uw_2d for n = 3; d2u pair order
    (00, 01, 02, 11, 12, 22)."""
    q, N, _, _ = u.shape
    c1 = 1.0 / (12.0 * dx)
    c2 = 1.0 / (12.0 * dx * dx)
    cm = 1.0 / (144.0 * dx * dx)
    for I in range(q):
        for i in range(N):
            im2 = wrap[0, i]; im1 = wrap[1, i]; ip1 = wrap[2, i]; ip2 = wrap[3, i]
            for j in range(N):
                jm2 = wrap[0, j]; jm1 = wrap[1, j]; jp1 = wrap[2, j]; jp2 = wrap[3, j]
                for k in range(N):
                    km2 = wrap[0, k]; km1 = wrap[1, k]; kp1 = wrap[2, k]; kp2 = wrap[3, k]
                    u0 = u[I, i, j, k]
                    xa = u[I, im2, j, k]; xb = u[I, im1, j, k]; xc = u[I, ip1, j, k]; xd = u[I, ip2, j, k]
                    ya = u[I, i, jm2, k]; yb = u[I, i, jm1, k]; yc = u[I, i, jp1, k]; yd = u[I, i, jp2, k]
                    za = u[I, i, j, km2]; zb = u[I, i, j, km1]; zc = u[I, i, j, kp1]; zd = u[I, i, j, kp2]
                    du[0, I, i, j, k] = (8.0 * (xc - xb) + (xa - xd)) * c1
                    du[1, I, i, j, k] = (8.0 * (yc - yb) + (ya - yd)) * c1
                    du[2, I, i, j, k] = (8.0 * (zc - zb) + (za - zd)) * c1
                    d2u[0, I, i, j, k] = (16.0 * (xb + xc) - (xa + xd) - 30.0 * u0) * c2
                    d2u[3, I, i, j, k] = (16.0 * (yb + yc) - (ya + yd) - 30.0 * u0) * c2
                    d2u[5, I, i, j, k] = (16.0 * (zb + zc) - (za + zd) - 30.0 * u0) * c2
                    m = 0.0
                    m += 1.0 * (8.0 * (u[I, im2, jp1, k] - u[I, im2, jm1, k]) + (u[I, im2, jm2, k] - u[I, im2, jp2, k]))
                    m -= 8.0 * (8.0 * (u[I, im1, jp1, k] - u[I, im1, jm1, k]) + (u[I, im1, jm2, k] - u[I, im1, jp2, k]))
                    m += 8.0 * (8.0 * (u[I, ip1, jp1, k] - u[I, ip1, jm1, k]) + (u[I, ip1, jm2, k] - u[I, ip1, jp2, k]))
                    m -= 1.0 * (8.0 * (u[I, ip2, jp1, k] - u[I, ip2, jm1, k]) + (u[I, ip2, jm2, k] - u[I, ip2, jp2, k]))
                    d2u[1, I, i, j, k] = m * cm
                    m = 0.0
                    m += 1.0 * (8.0 * (u[I, im2, j, kp1] - u[I, im2, j, km1]) + (u[I, im2, j, km2] - u[I, im2, j, kp2]))
                    m -= 8.0 * (8.0 * (u[I, im1, j, kp1] - u[I, im1, j, km1]) + (u[I, im1, j, km2] - u[I, im1, j, kp2]))
                    m += 8.0 * (8.0 * (u[I, ip1, j, kp1] - u[I, ip1, j, km1]) + (u[I, ip1, j, km2] - u[I, ip1, j, kp2]))
                    m -= 1.0 * (8.0 * (u[I, ip2, j, kp1] - u[I, ip2, j, km1]) + (u[I, ip2, j, km2] - u[I, ip2, j, kp2]))
                    d2u[2, I, i, j, k] = m * cm
                    m = 0.0
                    m += 1.0 * (8.0 * (u[I, i, jm2, kp1] - u[I, i, jm2, km1]) + (u[I, i, jm2, km2] - u[I, i, jm2, kp2]))
                    m -= 8.0 * (8.0 * (u[I, i, jm1, kp1] - u[I, i, jm1, km1]) + (u[I, i, jm1, km2] - u[I, i, jm1, kp2]))
                    m += 8.0 * (8.0 * (u[I, i, jp1, kp1] - u[I, i, jp1, km1]) + (u[I, i, jp1, km2] - u[I, i, jp1, kp2]))
                    m -= 1.0 * (8.0 * (u[I, i, jp2, kp1] - u[I, i, jp2, km1]) + (u[I, i, jp2, km2] - u[I, i, jp2, kp2]))
                    d2u[4, I, i, j, k] = m * cm
                    wxa = w[I, im2, j, k]; wxb = w[I, im1, j, k]; wxc = w[I, ip1, j, k]; wxd = w[I, ip2, j, k]
                    wya = w[I, i, jm2, k]; wyb = w[I, i, jm1, k]; wyc = w[I, i, jp1, k]; wyd = w[I, i, jp2, k]
                    wza = w[I, i, j, km2]; wzb = w[I, i, j, km1]; wzc = w[I, i, j, kp1]; wzd = w[I, i, j, kp2]
                    dw[0, I, i, j, k] = (8.0 * (wxc - wxb) + (wxa - wxd)) * c1
                    dw[1, I, i, j, k] = (8.0 * (wyc - wyb) + (wya - wyd)) * c1
                    dw[2, I, i, j, k] = (8.0 * (wzc - wzb) + (wza - wzd)) * c1


@njit(cache=True, nogil=True)
def d1_axis_2d(u, axis, dx, wrap, out):
    """Single-axis first derivative of a stack of 2D fields (q, N, N)."""
    q, N, _ = u.shape
    c1 = 1.0 / (12.0 * dx)
    for I in range(q):
        for i in range(N):
            for j in range(N):
                if axis == 0:
                    out[I, i, j] = (8.0 * (u[I, wrap[2, i], j] - u[I, wrap[1, i], j])
                                    + (u[I, wrap[0, i], j] - u[I, wrap[3, i], j])) * c1
                else:
                    out[I, i, j] = (8.0 * (u[I, i, wrap[2, j]] - u[I, i, wrap[1, j]])
                                    + (u[I, i, wrap[0, j]] - u[I, i, wrap[3, j]])) * c1


@njit(cache=True, nogil=True)
def d1_axis_3d(u, axis, dx, wrap, out):
    q, N, _, _ = u.shape
    c1 = 1.0 / (12.0 * dx)
    for I in range(q):
        for i in range(N):
            for j in range(N):
                for k in range(N):
                    if axis == 0:
                        out[I, i, j, k] = (8.0 * (u[I, wrap[2, i], j, k] - u[I, wrap[1, i], j, k])
                                           + (u[I, wrap[0, i], j, k] - u[I, wrap[3, i], j, k])) * c1
                    elif axis == 1:
                        out[I, i, j, k] = (8.0 * (u[I, i, wrap[2, j], k] - u[I, i, wrap[1, j], k])
                                           + (u[I, i, wrap[0, j], k] - u[I, i, wrap[3, j], k])) * c1
                    else:
                        out[I, i, j, k] = (8.0 * (u[I, i, j, wrap[2, k]] - u[I, i, j, wrap[1, k]])
                                           + (u[I, i, j, wrap[0, k]] - u[I, i, j, wrap[3, k]])) * c1


# ---------------------------------------------------------------------------
# Per-cell geometry helpers (dim = n+1, flattened cell index m).


@njit(cache=True, nogil=True, inline="always")
def _cell_metric(df, m, h):
    """Fill h_ab = eta_ab + sum_I df_a df_b at cell m; return det h."""
    dim = df.shape[0]
    q = df.shape[1]
    for a in range(dim):
        for b in range(a, dim):
            s = df[a, 0, m] * df[b, 0, m]
            for I in range(1, q):
                s += df[a, I, m] * df[b, I, m]
            h[a, b] = s
            h[b, a] = s
    h[0, 0] -= 1.0
    for a in range(1, dim):
        h[a, a] += 1.0
    if dim == 3:
        det = (h[0, 0] * (h[1, 1] * h[2, 2] - h[1, 2] * h[2, 1])
               - h[0, 1] * (h[1, 0] * h[2, 2] - h[1, 2] * h[2, 0])
               + h[0, 2] * (h[1, 0] * h[2, 1] - h[1, 1] * h[2, 0]))
    elif dim == 4:
        s0 = h[0, 0] * h[1, 1] - h[0, 1] * h[1, 0]
        s1 = h[0, 0] * h[1, 2] - h[0, 2] * h[1, 0]
        s2 = h[0, 0] * h[1, 3] - h[0, 3] * h[1, 0]
        s3 = h[0, 1] * h[1, 2] - h[0, 2] * h[1, 1]
        s4 = h[0, 1] * h[1, 3] - h[0, 3] * h[1, 1]
        s5 = h[0, 2] * h[1, 3] - h[0, 3] * h[1, 2]
        c5 = h[2, 2] * h[3, 3] - h[2, 3] * h[3, 2]
        c4 = h[2, 1] * h[3, 3] - h[2, 3] * h[3, 1]
        c3 = h[2, 1] * h[3, 2] - h[2, 2] * h[3, 1]
        c2 = h[2, 0] * h[3, 3] - h[2, 3] * h[3, 0]
        c1 = h[2, 0] * h[3, 2] - h[2, 2] * h[3, 0]
        c0 = h[2, 0] * h[3, 1] - h[2, 1] * h[3, 0]
        det = s0 * c5 - s1 * c4 + s2 * c3 + s3 * c2 - s4 * c1 + s5 * c0
    else:
        det = _det_generic(h, dim)
    return det


@njit(cache=True, nogil=True, inline="always")
def _det_generic(h, dim):
    """LU determinant with partial pivoting for dim > 4."""
    a = h.copy()
    det = a[0, 0] - a[0, 0] + 1.0  # one in the working dtype
    for col in range(dim):
        piv = col
        best = abs(a[col, col])
        for r in range(col + 1, dim):
            if abs(a[r, col]) > best:
                best = abs(a[r, col])
                piv = r
        if piv != col:
            for c in range(dim):
                tmp = a[col, c]
                a[col, c] = a[piv, c]
                a[piv, c] = tmp
            det = -det
        det *= a[col, col]
        if a[col, col] != 0:
            for r in range(col + 1, dim):
                fac = a[r, col] / a[col, col]
                for c in range(col, dim):
                    a[r, c] -= fac * a[col, c]
    return det


@njit(cache=True, nogil=True, inline="always")
def _cell_inverse(h, det, hinv):
    """Cofactor inverse for dim 3 or 4; Gauss-Jordan otherwise."""
    dim = h.shape[0]
    if dim == 3:
        hinv[0, 0] = (h[1, 1] * h[2, 2] - h[1, 2] * h[2, 1]) / det
        hinv[0, 1] = (h[0, 2] * h[2, 1] - h[0, 1] * h[2, 2]) / det
        hinv[0, 2] = (h[0, 1] * h[1, 2] - h[0, 2] * h[1, 1]) / det
        hinv[1, 0] = (h[1, 2] * h[2, 0] - h[1, 0] * h[2, 2]) / det
        hinv[1, 1] = (h[0, 0] * h[2, 2] - h[0, 2] * h[2, 0]) / det
        hinv[1, 2] = (h[0, 2] * h[1, 0] - h[0, 0] * h[1, 2]) / det
        hinv[2, 0] = (h[1, 0] * h[2, 1] - h[1, 1] * h[2, 0]) / det
        hinv[2, 1] = (h[0, 1] * h[2, 0] - h[0, 0] * h[2, 1]) / det
        hinv[2, 2] = (h[0, 0] * h[1, 1] - h[0, 1] * h[1, 0]) / det
    elif dim == 4:
        s0 = h[0, 0] * h[1, 1] - h[0, 1] * h[1, 0]
        s1 = h[0, 0] * h[1, 2] - h[0, 2] * h[1, 0]
        s2 = h[0, 0] * h[1, 3] - h[0, 3] * h[1, 0]
        s3 = h[0, 1] * h[1, 2] - h[0, 2] * h[1, 1]
        s4 = h[0, 1] * h[1, 3] - h[0, 3] * h[1, 1]
        s5 = h[0, 2] * h[1, 3] - h[0, 3] * h[1, 2]
        c5 = h[2, 2] * h[3, 3] - h[2, 3] * h[3, 2]
        c4 = h[2, 1] * h[3, 3] - h[2, 3] * h[3, 1]
        c3 = h[2, 1] * h[3, 2] - h[2, 2] * h[3, 1]
        c2 = h[2, 0] * h[3, 3] - h[2, 3] * h[3, 0]
        c1 = h[2, 0] * h[3, 2] - h[2, 2] * h[3, 0]
        c0 = h[2, 0] * h[3, 1] - h[2, 1] * h[3, 0]
        hinv[0, 0] = (h[1, 1] * c5 - h[1, 2] * c4 + h[1, 3] * c3) / det
        hinv[0, 1] = (-h[0, 1] * c5 + h[0, 2] * c4 - h[0, 3] * c3) / det
        hinv[0, 2] = (h[3, 1] * s5 - h[3, 2] * s4 + h[3, 3] * s3) / det
        hinv[0, 3] = (-h[2, 1] * s5 + h[2, 2] * s4 - h[2, 3] * s3) / det
        hinv[1, 0] = (-h[1, 0] * c5 + h[1, 2] * c2 - h[1, 3] * c1) / det
        hinv[1, 1] = (h[0, 0] * c5 - h[0, 2] * c2 + h[0, 3] * c1) / det
        hinv[1, 2] = (-h[3, 0] * s5 + h[3, 2] * s2 - h[3, 3] * s1) / det
        hinv[1, 3] = (h[2, 0] * s5 - h[2, 2] * s2 + h[2, 3] * s1) / det
        hinv[2, 0] = (h[1, 0] * c4 - h[1, 1] * c2 + h[1, 3] * c0) / det
        hinv[2, 1] = (-h[0, 0] * c4 + h[0, 1] * c2 - h[0, 3] * c0) / det
        hinv[2, 2] = (h[3, 0] * s4 - h[3, 1] * s2 + h[3, 3] * s0) / det
        hinv[2, 3] = (-h[2, 0] * s4 + h[2, 1] * s2 - h[2, 3] * s0) / det
        hinv[3, 0] = (-h[1, 0] * c3 + h[1, 1] * c1 - h[1, 2] * c0) / det
        hinv[3, 1] = (h[0, 0] * c3 - h[0, 1] * c1 + h[0, 2] * c0) / det
        hinv[3, 2] = (-h[3, 0] * s3 + h[3, 1] * s1 - h[3, 2] * s0) / det
        hinv[3, 3] = (h[2, 0] * s3 - h[2, 1] * s1 + h[2, 2] * s0) / det
    else:
        _gauss_jordan(h, hinv, dim)


@njit(cache=True, nogil=True, inline="always")
def _gauss_jordan(h, hinv, dim):
    a = h.copy()
    for r in range(dim):
        for c in range(dim):
            hinv[r, c] = 1.0 if r == c else 0.0
    for col in range(dim):
        piv = col
        best = abs(a[col, col])
        for r in range(col + 1, dim):
            if abs(a[r, col]) > best:
                best = abs(a[r, col])
                piv = r
        if piv != col:
            for c in range(dim):
                tmp = a[col, c]; a[col, c] = a[piv, c]; a[piv, c] = tmp
                tmp = hinv[col, c]; hinv[col, c] = hinv[piv, c]; hinv[piv, c] = tmp
        p = a[col, col]
        for c in range(dim):
            a[col, c] /= p
            hinv[col, c] /= p
        for r in range(dim):
            if r != col:
                fac = a[r, col]
                if fac != 0:
                    for c in range(dim):
                        a[r, c] -= fac * a[col, c]
                        hinv[r, c] -= fac * hinv[col, c]


@njit(cache=True, nogil=True, inline="always")
def _cell_sb(df, m, hinv, S, B):
    """S^{JL} = h^{ab} f^J_a f^L_b and B^{mu J} = h^{mu a} f^J_a at cell m."""
    dim = df.shape[0]
    q = df.shape[1]
    for mu in range(dim):
        for J in range(q):
            s = hinv[mu, 0] * df[0, J, m]
            for a in range(1, dim):
                s += hinv[mu, a] * df[a, J, m]
            B[mu, J] = s
    for J in range(q):
        for L in range(J, q):
            s = B[0, J] * df[0, L, m]
            for a in range(1, dim):
                s += B[a, J] * df[a, L, m]
            S[J, L] = s
            S[L, J] = s


@njit(cache=True, nogil=True, inline="always")
def _cell_h_block(hinv, S, vol, mu, nu, Hblk):
    """One (mu, nu) block of the principal coefficient tensor:
    vol * h^{mu nu} (delta_JL - S^{JL})."""
    q = S.shape[0]
    g = vol * hinv[mu, nu]
    for J in range(q):
        for L in range(q):
            val = -g * S[J, L]
            if J == L:
                val += g
            Hblk[J, L] = val


@njit(cache=True, nogil=True, inline="always")
def _cell_solve(Hb, b, a_out):
    """Solve the q x q symmetric block system Hb a = b; return |det Hb|."""
    q = Hb.shape[0]
    if q == 1:
        d = Hb[0, 0]
        a_out[0] = b[0] / d
        return abs(d)
    if q == 2:
        d = Hb[0, 0] * Hb[1, 1] - Hb[0, 1] * Hb[1, 0]
        a_out[0] = (Hb[1, 1] * b[0] - Hb[0, 1] * b[1]) / d
        a_out[1] = (-Hb[1, 0] * b[0] + Hb[0, 0] * b[1]) / d
        return abs(d)
    if q == 3:
        d = (Hb[0, 0] * (Hb[1, 1] * Hb[2, 2] - Hb[1, 2] * Hb[2, 1])
             - Hb[0, 1] * (Hb[1, 0] * Hb[2, 2] - Hb[1, 2] * Hb[2, 0])
             + Hb[0, 2] * (Hb[1, 0] * Hb[2, 1] - Hb[1, 1] * Hb[2, 0]))
        a_out[0] = ((Hb[1, 1] * Hb[2, 2] - Hb[1, 2] * Hb[2, 1]) * b[0]
                    + (Hb[0, 2] * Hb[2, 1] - Hb[0, 1] * Hb[2, 2]) * b[1]
                    + (Hb[0, 1] * Hb[1, 2] - Hb[0, 2] * Hb[1, 1]) * b[2]) / d
        a_out[1] = ((Hb[1, 2] * Hb[2, 0] - Hb[1, 0] * Hb[2, 2]) * b[0]
                    + (Hb[0, 0] * Hb[2, 2] - Hb[0, 2] * Hb[2, 0]) * b[1]
                    + (Hb[0, 2] * Hb[1, 0] - Hb[0, 0] * Hb[1, 2]) * b[2]) / d
        a_out[2] = ((Hb[1, 0] * Hb[2, 1] - Hb[1, 1] * Hb[2, 0]) * b[0]
                    + (Hb[0, 1] * Hb[2, 0] - Hb[0, 0] * Hb[2, 1]) * b[1]
                    + (Hb[0, 0] * Hb[1, 1] - Hb[0, 1] * Hb[1, 0]) * b[2]) / d
        return abs(d)
    # partial-pivot elimination, largest magnitude, ties to lowest index
    aa = Hb.copy()
    bb = b.copy()
    detmag = 1.0
    for col in range(q):
        piv = col
        best = abs(aa[col, col])
        for r in range(col + 1, q):
            if abs(aa[r, col]) > best:
                best = abs(aa[r, col])
                piv = r
        detmag *= best
        if piv != col:
            for c in range(q):
                tmp = aa[col, c]; aa[col, c] = aa[piv, c]; aa[piv, c] = tmp
            tmp = bb[col]; bb[col] = bb[piv]; bb[piv] = tmp
        if best == 0.0:
            return 0.0
        for r in range(col + 1, q):
            fac = aa[r, col] / aa[col, col]
            bb[r] -= fac * bb[col]
            for c in range(col, q):
                aa[r, c] -= fac * aa[col, c]
    for r in range(q - 1, -1, -1):
        s = bb[r]
        for c in range(r + 1, q):
            s -= aa[r, c] * a_out[c]
        a_out[r] = s / aa[r, r]
    return detmag


@njit(cache=True, nogil=True)
def rhs_checked(df, dkv, d2f, dim, pair2, out_a, out_res, want_res):
    """Solve for the second time derivative at every cell, validating the
    timelike and coercivity preconditions.

    df: (dim, q, M); dkv: (dim-1, q, M); d2f: packed spatial second
    derivatives ((n(n+1)/2), q, M); pair2: spatial pair index table
    (n, n) -> packed id.  out_a: (q, M).  Returns
    (status, cell, min_margin, max_abs_a, singular_block_detmag).
    """
    q = df.shape[1]
    M = df.shape[2]
    n = dim - 1
    h = np.empty((dim, dim))
    hinv = np.empty((dim, dim))
    S = np.empty((q, q))
    B = np.empty((dim, q))
    Hb = np.empty((q, q))
    H00 = np.empty((q, q))
    bvec = np.empty(q)
    avec = np.empty(q)
    min_margin = 1e300
    max_abs_a = 0.0
    for m in range(M):
        det = _cell_metric(df, m, h)
        if det >= -_DEG_TOL:
            return STATUS_SPACELIKE, m, det, max_abs_a, 0.0
        vol = np.sqrt(-det)
        _cell_inverse(h, det, hinv)
        _cell_sb(df, m, hinv, S, B)
        margin_acc = 0.0
        for J in range(q):
            bvec[J] = 0.0
        for mu in range(dim):
            for nu in range(mu, dim):
                _cell_h_block(hinv, S, vol, mu, nu, Hb)
                w = 1.0 if mu == nu else 2.0
                eta_mn = 0.0
                if mu == nu:
                    eta_mn = -1.0 if mu == 0 else 1.0
                for J in range(q):
                    for L in range(q):
                        dev = Hb[J, L]
                        if J == L:
                            dev -= eta_mn
                        margin_acc += w * abs(dev)
                if mu == 0 and nu == 0:
                    for J in range(q):
                        for L in range(q):
                            H00[J, L] = Hb[J, L]
                elif mu == 0:
                    k = nu - 1
                    for L in range(q):
                        s = 0.0
                        for J in range(q):
                            s += Hb[J, L] * dkv[k, J, m]
                        bvec[L] -= 2.0 * s
                else:
                    p = pair2[mu - 1, nu - 1]
                    for L in range(q):
                        s = 0.0
                        for J in range(q):
                            s += Hb[J, L] * d2f[p, J, m]
                        bvec[L] -= w * s
        margin = 0.5 - margin_acc
        if margin <= 0.0:
            return STATUS_COERCIVITY, m, margin, max_abs_a, 0.0
        if margin < min_margin:
            min_margin = margin
        detmag = _cell_solve(H00, bvec, avec)
        if detmag < _SING_TOL:
            return STATUS_SINGULAR_BLOCK, m, margin, max_abs_a, detmag
        for J in range(q):
            out_a[J, m] = avec[J]
            aj = abs(avec[J])
            if aj > max_abs_a:
                max_abs_a = aj
            if want_res:
                s = -bvec[J]
                for L in range(q):
                    s += H00[J, L] * avec[L]
                out_res[J, m] = s
    return STATUS_OK, -1, min_margin, max_abs_a, 1.0


@njit(cache=True, nogil=True)
def rhs_raw(df, dkv, d2f, dim, pair2, out_a):
    """Dtype-generic variant of rhs_checked: no validation, no reporting.
    Used for algebraic directional derivatives (complex-step probes)."""
    q = df.shape[1]
    M = df.shape[2]
    h = np.empty((dim, dim), dtype=df.dtype)
    hinv = np.empty((dim, dim), dtype=df.dtype)
    S = np.empty((q, q), dtype=df.dtype)
    B = np.empty((dim, q), dtype=df.dtype)
    Hb = np.empty((q, q), dtype=df.dtype)
    H00 = np.empty((q, q), dtype=df.dtype)
    bvec = np.empty(q, dtype=df.dtype)
    avec = np.empty(q, dtype=df.dtype)
    for m in range(M):
        det = _cell_metric(df, m, h)
        vol = np.sqrt(-det)
        _cell_inverse(h, det, hinv)
        _cell_sb(df, m, hinv, S, B)
        for J in range(q):
            bvec[J] = 0.0
        for mu in range(dim):
            for nu in range(mu, dim):
                _cell_h_block(hinv, S, vol, mu, nu, Hb)
                if mu == 0 and nu == 0:
                    for J in range(q):
                        for L in range(q):
                            H00[J, L] = Hb[J, L]
                elif mu == 0:
                    k = nu - 1
                    for L in range(q):
                        s = Hb[0, L] * dkv[k, 0, m]
                        for J in range(1, q):
                            s += Hb[J, L] * dkv[k, J, m]
                        bvec[L] -= 2.0 * s
                else:
                    p = pair2[mu - 1, nu - 1]
                    w = 1.0 if mu == nu else 2.0
                    for L in range(q):
                        s = Hb[0, L] * d2f[p, 0, m]
                        for J in range(1, q):
                            s += Hb[J, L] * d2f[p, J, m]
                        bvec[L] -= w * s
        _cell_solve(H00, bvec, avec)
        for J in range(q):
            out_a[J, m] = avec[J]


@njit(cache=True, nogil=True)
def principal_fields(df, dim, out_H, out_margin):
    """Packed principal-coefficient components and coercivity margin on the
    whole grid.  out_H: (dim(dim+1)/2, q, q, M) in sym2 pair order; margin
    entries are set to the true margin (dtype-generic: margin only written
    for real input, pass a 1-sized dummy otherwise)."""
    q = df.shape[1]
    M = df.shape[2]
    h = np.empty((dim, dim), dtype=df.dtype)
    hinv = np.empty((dim, dim), dtype=df.dtype)
    S = np.empty((q, q), dtype=df.dtype)
    B = np.empty((dim, q), dtype=df.dtype)
    Hb = np.empty((q, q), dtype=df.dtype)
    want_margin = out_margin.shape[0] == M
    for m in range(M):
        det = _cell_metric(df, m, h)
        vol = np.sqrt(-det)
        _cell_inverse(h, det, hinv)
        _cell_sb(df, m, hinv, S, B)
        margin_acc = 0.0
        p = 0
        for mu in range(dim):
            for nu in range(mu, dim):
                _cell_h_block(hinv, S, vol, mu, nu, Hb)
                for J in range(q):
                    for L in range(q):
                        out_H[p, J, L, m] = Hb[J, L]
                if want_margin:
                    w = 1.0 if mu == nu else 2.0
                    eta_mn = 0.0
                    if mu == nu:
                        eta_mn = -1.0 if mu == 0 else 1.0
                    for J in range(q):
                        for L in range(q):
                            dev = Hb[J, L]
                            if J == L:
                                dev -= eta_mn
                            margin_acc += w * abs(dev)
                p += 1
        if want_margin:
            out_margin[m] = 0.5 - margin_acc


@njit(cache=True, nogil=True)
def flux_vector(df, dim, out_phi):
    """Divergence-form flux eta^{mu nu} f_nu - sqrt(-det h) h^{mu nu} f_nu,
    i.e. the coefficient tensor contracted with the jet.  Dtype-generic.
    out_phi: (dim, q, M)."""
    q = df.shape[1]
    M = df.shape[2]
    h = np.empty((dim, dim), dtype=df.dtype)
    hinv = np.empty((dim, dim), dtype=df.dtype)
    for m in range(M):
        det = _cell_metric(df, m, h)
        vol = np.sqrt(-det)
        _cell_inverse(h, det, hinv)
        for I in range(q):
            for mu in range(dim):
                eta_term = -df[0, I, m] if mu == 0 else df[mu, I, m]
                s = hinv[mu, 0] * df[0, I, m]
                for nu in range(1, dim):
                    s += hinv[mu, nu] * df[nu, I, m]
                out_phi[mu, I, m] = eta_term - vol * s
    return 0


@njit(cache=True, nogil=True)
def norms_accumulate(fv, D1, D2, D3, coords, t, codes, Amats, pair_alpha,
                     p2, p3, linelen,
                     out_ssv, out_ssg, out_mxv, out_mxg):
    """Accumulate per-line partial statistics for every product of at most
    two vector fields applied to the state.

    fv: (q, M) field values; D1: (dim, q, M); D2/D3: packed symmetric
    second/third derivative stacks; coords: (n, M); codes/Amats encode the
    field list; pair_alpha[a, b] maps a <= b to the product's slot.
    Outputs are (nlines, nA): sums of squared values / squared gradients
    and maxima of the pointwise squared magnitudes.  The reduction order
    inside a line is fixed (sequential), lines are combined by the caller
    with the pairwise tree.
    """
    dim = D1.shape[0]
    q = D1.shape[1]
    M = D1.shape[2]
    nZ = codes.shape[0]
    nlines = out_ssv.shape[0]
    nsym2 = D2.shape[0]
    cvals = np.empty((nZ, dim))
    G = np.empty((nZ, q))
    dG = np.empty((nZ, dim, q))
    ddG = np.empty((nZ, nsym2, q))
    for line in range(nlines):
        for pos in range(linelen):
            m = line * linelen + pos
            for z in range(nZ):
                for mu in range(dim):
                    code = codes[z, mu]
                    if code == 0:
                        cv = 0.0
                    elif code == 1:
                        cv = 1.0
                    elif code == -1:
                        cv = -1.0
                    elif code == 2:
                        cv = t
                    elif code >= 10:
                        cv = coords[code - 10, m]
                    else:
                        cv = -coords[-code - 10, m]
                    cvals[z, mu] = cv
            # bare state (empty product)
            sv = 0.0
            for I in range(q):
                sv += fv[I, m] * fv[I, m]
            sg = 0.0
            for mu in range(dim):
                for I in range(q):
                    sg += D1[mu, I, m] * D1[mu, I, m]
            out_ssv[line, 0] += sv
            out_ssg[line, 0] += sg
            if sv > out_mxv[line, 0]:
                out_mxv[line, 0] = sv
            if sg > out_mxg[line, 0]:
                out_mxg[line, 0] = sg
            # single fields: values, gradients, and second derivatives
            for z in range(nZ):
                for I in range(q):
                    g = 0.0
                    for mu in range(dim):
                        c = cvals[z, mu]
                        if c != 0.0:
                            g += c * D1[mu, I, m]
                    G[z, I] = g
                for lam in range(dim):
                    for I in range(q):
                        s = 0.0
                        for mu in range(dim):
                            a_ = Amats[z, mu, lam]
                            if a_ != 0.0:
                                s += a_ * D1[mu, I, m]
                            c = cvals[z, mu]
                            if c != 0.0:
                                s += c * D2[p2[lam, mu], I, m]
                        dG[z, lam, I] = s
                for lam in range(dim):
                    for nu in range(lam, dim):
                        for I in range(q):
                            s = 0.0
                            for mu in range(dim):
                                c = cvals[z, mu]
                                if c != 0.0:
                                    s += c * D3[p3[lam, nu, mu], I, m]
                                a1 = Amats[z, mu, nu]
                                if a1 != 0.0:
                                    s += a1 * D2[p2[lam, mu], I, m]
                                a2 = Amats[z, mu, lam]
                                if a2 != 0.0:
                                    s += a2 * D2[p2[nu, mu], I, m]
                            ddG[z, p2[lam, nu], I] = s
                sv = 0.0
                for I in range(q):
                    sv += G[z, I] * G[z, I]
                sg = 0.0
                for lam in range(dim):
                    for I in range(q):
                        sg += dG[z, lam, I] * dG[z, lam, I]
                al = 1 + z
                out_ssv[line, al] += sv
                out_ssg[line, al] += sg
                if sv > out_mxv[line, al]:
                    out_mxv[line, al] = sv
                if sg > out_mxg[line, al]:
                    out_mxg[line, al] = sg
            # products: first field in canonical order applied first,
            # the second one acts on the intermediate
            for a_in in range(nZ):
                for b_out in range(a_in, nZ):
                    al = pair_alpha[a_in, b_out]
                    sv = 0.0
                    for I in range(q):
                        zz = 0.0
                        for mu in range(dim):
                            c = cvals[b_out, mu]
                            if c != 0.0:
                                zz += c * dG[a_in, mu, I]
                        sv += zz * zz
                    sg = 0.0
                    for lam in range(dim):
                        for I in range(q):
                            s = 0.0
                            for mu in range(dim):
                                a_ = Amats[b_out, mu, lam]
                                if a_ != 0.0:
                                    s += a_ * dG[a_in, mu, I]
                                c = cvals[b_out, mu]
                                if c != 0.0:
                                    s += c * ddG[a_in, p2[lam, mu], I]
                            sg += s * s
                    out_ssv[line, al] += sv
                    out_ssg[line, al] += sg
                    if sv > out_mxv[line, al]:
                        out_mxv[line, al] = sv
                    if sg > out_mxg[line, al]:
                        out_mxg[line, al] = sg

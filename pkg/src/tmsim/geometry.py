"""Pointwise algebra of the induced geometry on a timelike graph.

Everything here is a pure function of the first-derivative jet
df[mu, I] = d_mu f^I (mu = 0..n spacetime, I = 0..q-1 extrinsic).  All
functions accept trailing batch/grid axes, so the same code serves the
single-point API and whole-grid evaluation.  Greek indices are contracted
explicitly against the metric inverse; Latin indices against the identity.

This module is the reference implementation; the compiled kernels in
``kernels.py`` reproduce it cell by cell and are cross-checked in tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularMetric, SpacelikeDegeneration

SINGULAR_TOL = 1e-14
# det h >= -DEGENERACY_TOL counts as loss of timelike character
DEGENERACY_TOL = 1e-14


def minkowski_diag(dim: int) -> np.ndarray:
    """diag(-1, 1, ..., 1); identical for the inverse metric."""
    eta = np.ones(dim)
    eta[0] = -1.0
    return eta


@dataclass
class FirstJet:
    """First derivatives of the graph map at one event."""

    n: int
    q: int
    df: np.ndarray  # (n+1, q)

    def __post_init__(self):
        self.df = np.asarray(self.df, dtype=float)
        if self.df.shape != (self.n + 1, self.q):
            raise ValueError(f"jet must have shape {(self.n + 1, self.q)}, got {self.df.shape}")
        if not np.isfinite(self.df).all():
            raise ValueError("jet entries must be finite")


@dataclass
class MetricPoint:
    """Geometric package at one event: induced metric, inverse,
    determinant, volume factor, and the two coefficient tensors."""

    h: np.ndarray        # (n+1, n+1)
    h_inv: np.ndarray    # (n+1, n+1)
    det_h: float
    vol: float           # sqrt(-det h)
    flux: np.ndarray     # (n+1, n+1): divergence-form coefficient
    principal: np.ndarray  # (n+1, n+1, q, q): quasilinear coefficient


def induced_metric(df: np.ndarray | FirstJet) -> np.ndarray:
    """h_ab = eta_ab + sum_I d_a f^I d_b f^I."""
    if isinstance(df, FirstJet):
        df = df.df
    dim = df.shape[0]
    h = np.einsum("im...,jm...->ij...", df, df)
    eta = minkowski_diag(dim)
    for i in range(dim):
        h[i, i] += eta[i]
    return h


def _det2(m):
    return m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]


def _det3(m):
    return (
        m[0, 0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
        - m[0, 1] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
        + m[0, 2] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0])
    )


def det_and_inverse(h: np.ndarray):
    """Closed-form cofactor determinant and inverse for sizes 2..4.

    Shapes (dim, dim, ...) -> (det (...), inverse (dim, dim, ...)).
    Raises SingularMetric when |det| falls below threshold (real input).
    """
    dim = h.shape[0]
    if h.shape[1] != dim:
        raise ValueError(f"expected square leading block, got shape {h.shape}")
    if dim > 4:
        # outside the desk-scale range; lean on LAPACK
        hm = np.moveaxis(h.reshape(dim, dim, -1), -1, 0)
        det = np.linalg.det(hm).reshape(h.shape[2:])
        inv = np.moveaxis(np.linalg.inv(hm), 0, -1).reshape(h.shape)
        if not np.iscomplexobj(h) and np.any(np.abs(det) < SINGULAR_TOL):
            cell = _first_true_cell(np.abs(det) < SINGULAR_TOL)
            raise SingularMetric(float(det if np.ndim(det) == 0 else det[cell]), cell)
        return det, inv
    if dim == 2:
        det = _det2(h)
        adj = np.empty_like(h)
        adj[0, 0] = h[1, 1]
        adj[1, 1] = h[0, 0]
        adj[0, 1] = -h[0, 1]
        adj[1, 0] = -h[1, 0]
    elif dim == 3:
        det = _det3(h)
        adj = np.empty_like(h)
        for i in range(3):
            for j in range(3):
                r = [a for a in range(3) if a != j]
                c = [b for b in range(3) if b != i]
                adj[i, j] = (-1) ** (i + j) * _det2(h[np.ix_(r, c)])
    else:
        # 4x4 via expansion in 2x2 minors of rows (0,1) and (2,3)
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
        adj = np.empty_like(h)
        adj[0, 0] = h[1, 1] * c5 - h[1, 2] * c4 + h[1, 3] * c3
        adj[0, 1] = -h[0, 1] * c5 + h[0, 2] * c4 - h[0, 3] * c3
        adj[0, 2] = h[3, 1] * s5 - h[3, 2] * s4 + h[3, 3] * s3
        adj[0, 3] = -h[2, 1] * s5 + h[2, 2] * s4 - h[2, 3] * s3
        adj[1, 0] = -h[1, 0] * c5 + h[1, 2] * c2 - h[1, 3] * c1
        adj[1, 1] = h[0, 0] * c5 - h[0, 2] * c2 + h[0, 3] * c1
        adj[1, 2] = -h[3, 0] * s5 + h[3, 2] * s2 - h[3, 3] * s1
        adj[1, 3] = h[2, 0] * s5 - h[2, 2] * s2 + h[2, 3] * s1
        adj[2, 0] = h[1, 0] * c4 - h[1, 1] * c2 + h[1, 3] * c0
        adj[2, 1] = -h[0, 0] * c4 + h[0, 1] * c2 - h[0, 3] * c0
        adj[2, 2] = h[3, 0] * s4 - h[3, 1] * s2 + h[3, 3] * s0
        adj[2, 3] = -h[2, 0] * s4 + h[2, 1] * s2 - h[2, 3] * s0
        adj[3, 0] = -h[1, 0] * c3 + h[1, 1] * c1 - h[1, 2] * c0
        adj[3, 1] = h[0, 0] * c3 - h[0, 1] * c1 + h[0, 2] * c0
        adj[3, 2] = -h[3, 0] * s3 + h[3, 1] * s1 - h[3, 2] * s0
        adj[3, 3] = h[2, 0] * s3 - h[2, 1] * s1 + h[2, 2] * s0
    if not np.iscomplexobj(h):
        bad = np.abs(det) < SINGULAR_TOL
        if np.any(bad):
            cell = _first_true_cell(bad)
            raise SingularMetric(float(np.atleast_1d(det)[cell] if cell else det), cell)
    return det, adj / det


def _first_true_cell(mask):
    """Index of the first True entry (None for 0-d scalars)."""
    mask = np.asarray(mask)
    if mask.ndim == 0:
        return None
    idx = np.argwhere(mask)
    return tuple(int(v) for v in idx[0])


def _require_timelike(det):
    if np.iscomplexobj(det):
        return
    bad = det >= -DEGENERACY_TOL
    if np.any(bad):
        cell = _first_true_cell(bad)
        val = float(det if np.ndim(det) == 0 else det[cell])
        raise SpacelikeDegeneration(val, cell)


def volume_factor(det):
    """sqrt(-det h), positive on timelike graphs."""
    return np.sqrt(-det)


def flux_coefficient(df: np.ndarray | FirstJet) -> np.ndarray:
    """Divergence-form coefficient eta^{mu nu} - sqrt(-det h) h^{mu nu};
    vanishes quadratically as the jet goes to zero."""
    if isinstance(df, FirstJet):
        df = df.df
    h = induced_metric(df)
    det, hinv = det_and_inverse(h)
    _require_timelike(det)
    vol = volume_factor(det)
    F = -vol * hinv
    eta = minkowski_diag(df.shape[0])
    for i in range(df.shape[0]):
        F[i, i] += eta[i]
    return F


def principal_coefficient(df: np.ndarray | FirstJet) -> np.ndarray:
    """Coefficient tensor of the symmetric second-order form, shape
    (n+1, n+1, q, q, ...).

    H^{mu nu}_{JL} = sqrt(-det h) h^{mu nu} (delta_JL - S^{JL}) with
    S^{JL} = h^{ab} f^J_a f^L_b: exactly the coefficient produced by the
    chain-rule expansion of the area flux d_mu[sqrt(-det h) h^{mu nu}
    f_nu], so the second-order form and the divergence form have the same
    solutions (rank-one product terms cancel antisymmetrically against
    the symmetric Hessian and never enter).  Symmetric in the spacetime
    pair and in the extrinsic pair by construction."""
    if isinstance(df, FirstJet):
        df = df.df
    h = induced_metric(df)
    det, hinv = det_and_inverse(h)
    _require_timelike(det)
    vol = volume_factor(det)
    # S^{JL} = h^{ab} f^J_a f^L_b
    S = np.einsum("ab...,aj...,bl...->jl...", hinv, df, df)
    q = df.shape[1]
    H = np.einsum("mn...,jl...->mnjl...",
                  hinv, np.eye(q).reshape((q, q) + (1,) * (df.ndim - 2)) - S)
    H *= vol
    return H


def metric_point(jet: FirstJet) -> MetricPoint:
    """Assemble the full geometric package at one event."""
    h = induced_metric(jet)
    det, hinv = det_and_inverse(h)
    _require_timelike(det)
    vol = float(volume_factor(det))
    return MetricPoint(
        h=h,
        h_inv=hinv,
        det_h=float(det),
        vol=vol,
        flux=flux_coefficient(jet),
        principal=principal_coefficient(jet),
    )


def coercivity_margin(H: np.ndarray) -> float | np.ndarray:
    """1/2 minus the summed deviation of the principal coefficients from
    their flat value; positive means the hyperbolicity condition holds."""
    dim, _, q = H.shape[0], H.shape[1], H.shape[2]
    eta = minkowski_diag(dim)
    # subtract the flat tensor eta^{mn} delta_{JL} before taking moduli
    dev = H.copy()
    for m in range(dim):
        for J in range(q):
            dev[m, m, J, J] -= eta[m]
    total = np.sum(np.abs(dev), axis=(0, 1, 2, 3))
    result = 0.5 - total
    return float(result) if np.ndim(result) == 0 else result

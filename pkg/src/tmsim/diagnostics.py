"""Measurements: weighted norms over the Lorentz fields, the energy
inequality monitor, null forms and their structure checks, the
determinant expansion probe, and decay-rate fitting.

Time derivatives above first order always come from the evolution
equation (the solved second time derivative, its spatial stencils, and an
algebraic directional derivative for the pure third time derivative);
nothing is ever differenced across snapshots except the divergence-form
flux, which owns that discretization by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry, kernels
from .errors import DegenerateSeries, IncompleteSeries
from .evolution import _rhs_full, parallel_map, state_derivatives
from .grid import FieldState, GridSpec, pairwise_sum, reduce_norms
from .vectorfields import (VectorField, ZField, SampledField, apply_vector_field,
                           coefficient_grids, lorentz_fields)

COMPLEX_STEP = 1e-100


# ---------------------------------------------------------------------------
# Derivative bundle


@dataclass
class DerivativeBundle:
    """All derivatives of a state needed by the norm and null-form
    machinery: full first derivatives, the complete second-derivative
    tensor (time-time from the solved equation), and third derivatives
    with the pure-time component from the differentiated equation."""

    grid: GridSpec
    t: float
    f: np.ndarray          # (q, grid)
    D1: np.ndarray         # (dim, q, grid)
    D2: np.ndarray         # (nsym2, q, grid), packed
    D3: np.ndarray | None  # (nsym3, q, grid), packed
    pack2: np.ndarray
    pack3: np.ndarray
    min_margin: float
    pde_residual: np.ndarray | None  # (q, grid): residual of the block solve
    ddf: np.ndarray        # (q, grid): second time derivative
    dkv: np.ndarray        # (n, q, grid)
    dka: np.ndarray | None  # (n, q, grid): spatial gradient of ddf


def third_time_derivative(state: FieldState, df, dkv, d2f, a, da, d2v) -> np.ndarray:
    """Pure third time derivative from the evolution equation: the solved
    acceleration is an algebraic function of (df, dkv, d2f); its time
    derivative is the directional derivative along the time derivatives of
    those inputs, evaluated by a complex step (no subtractive
    cancellation, no snapshot differencing)."""
    g = state.grid
    dim = g.n + 1
    q = g.q
    M = g.num_cells
    eps = COMPLEX_STEP
    df_t = np.concatenate([a[None], dkv], axis=0)
    df_c = df.reshape(dim, q, M).astype(np.complex128)
    df_c += 1j * eps * df_t.reshape(dim, q, M)
    dkv_c = dkv.reshape(g.n, q, M).astype(np.complex128)
    dkv_c += 1j * eps * da.reshape(g.n, q, M)
    d2f_c = d2f.reshape(-1, q, M).astype(np.complex128)
    d2f_c += 1j * eps * d2v.reshape(-1, q, M)
    a_c = np.empty((q, M), dtype=np.complex128)
    kernels.rhs_raw(df_c, dkv_c, d2f_c, dim, kernels.sym2_index(g.n), a_c)
    return (a_c.imag / eps).reshape((q,) + g.shape)


def _d1_stack(u: np.ndarray, axis: int, grid: GridSpec, wrap) -> np.ndarray:
    """Single-axis first derivative of a (q, grid) stack via the kernels."""
    out = np.empty_like(u)
    if grid.n == 2:
        kernels.d1_axis_2d(u, axis, grid.dx, wrap, out)
    elif grid.n == 3:
        kernels.d1_axis_3d(u, axis, grid.dx, wrap, out)
    else:
        from .grid import diff1
        for I in range(u.shape[0]):
            out[I] = diff1(u[I], axis, grid.dx)
    return out


def build_bundle(state: FieldState, need_third: bool = True,
                 ddf_supplier=None, dddf_supplier=None,
                 workers: int = 1) -> DerivativeBundle:
    """Assemble the derivative bundle for one state.

    With the default suppliers the second time derivative comes from the
    evolution equation's block solve and the third from its differentiated
    form; passing both suppliers overrides the underlying equation (used
    to cross-check against the flat wave)."""
    g = state.grid
    dim, q = g.n + 1, g.q
    pack2 = kernels.sym2_index(dim)
    pack3 = kernels.sym3_index(dim)
    wrap = kernels.wrap_table(g.points_per_axis)
    derivs = state_derivatives(state, workers)
    df, dkv, d2f = derivs

    if ddf_supplier is None:
        a, min_margin, _, res = _rhs_full(state, want_residual=True, derivs=derivs)
    else:
        a = ddf_supplier(state)
        res = None
        min_margin = float(np.min(coercivity_margin_grid(state, df=df)))

    nsym2 = dim * (dim + 1) // 2
    D2 = np.empty((nsym2, q) + g.shape)
    D2[pack2[0, 0]] = a
    for k in range(g.n):
        D2[pack2[0, k + 1]] = dkv[k]
    pair_sp = kernels.sym2_index(g.n)
    for j in range(g.n):
        for k in range(j, g.n):
            D2[pack2[j + 1, k + 1]] = d2f[pair_sp[j, k]]

    D3 = None
    da = None
    if need_third:
        nsym3 = len(kernels.sym3_triples(dim))
        D3 = np.empty((nsym3, q) + g.shape)
        # one fused pass: spatial second derivatives of v, gradient of a
        dv = np.empty((g.n, q) + g.shape)
        d2v = np.empty((g.n * (g.n + 1) // 2, q) + g.shape)
        da = np.empty((g.n, q) + g.shape)
        if g.n == 2:
            kernels.derivs_uw_2d(state.v, a, g.dx, wrap, dv, d2v, da)
        elif g.n == 3:
            kernels.derivs_uw_3d(state.v, a, g.dx, wrap, dv, d2v, da)
        else:
            from .grid import diff1, diff2
            for k in range(g.n):
                for I in range(q):
                    dv[k, I] = diff1(state.v[I], k, g.dx)
                    da[k, I] = diff1(a[I], k, g.dx)
            for j in range(g.n):
                for k in range(j, g.n):
                    for I in range(q):
                        if j == k:
                            d2v[pair_sp[j, k], I] = diff2(state.v[I], j, g.dx)
                        else:
                            d2v[pair_sp[j, k], I] = diff1(dv[j, I], k, g.dx)
        if dddf_supplier is None:
            D3[pack3[0, 0, 0]] = third_time_derivative(state, df, dkv, d2f, a, da, d2v)
        else:
            D3[pack3[0, 0, 0]] = dddf_supplier(state)
        for k in range(g.n):
            D3[pack3[0, 0, k + 1]] = da[k]
        for j in range(g.n):
            for k in range(j, g.n):
                D3[pack3[0, j + 1, k + 1]] = d2v[pair_sp[j, k]]
        # purely spatial third derivatives: one more stencil on the packed
        # second derivatives, deduplicated over ordered triples
        tasks = []
        slots = []
        for i in range(g.n):
            for j in range(i, g.n):
                for k in range(j, g.n):
                    slots.append(pack3[i + 1, j + 1, k + 1])
                    tasks.append(lambda src=d2f[pair_sp[j, k]], ax=i:
                                 _d1_stack(src, ax, g, wrap))
        results = parallel_map(tasks, workers)
        for slot, arr in zip(slots, results):
            D3[slot] = arr

    return DerivativeBundle(
        grid=g, t=state.t, f=state.f, D1=df, D2=D2, D3=D3,
        pack2=pack2, pack3=pack3, min_margin=min_margin,
        pde_residual=res, ddf=a, dkv=dkv, dka=da,
    )


def coercivity_margin_grid(state: FieldState, df=None) -> np.ndarray:
    """Pointwise hyperbolicity margin over the whole grid."""
    g = state.grid
    dim = g.n + 1
    if df is None:
        from .evolution import jet_arrays
        df = jet_arrays(state)
    M = g.num_cells
    nsym2 = dim * (dim + 1) // 2
    Hp = np.empty((nsym2, g.q, g.q, M))
    margin = np.empty(M)
    kernels.principal_fields(df.reshape(dim, g.q, M), dim, Hp, margin)
    return margin.reshape(g.shape)


# ---------------------------------------------------------------------------
# Norms


@dataclass
class NormsRecord:
    """One time sample of the truncated weighted norms and the run
    monitors.  dinf is the plain sup-norm of the first derivatives (the
    zero-order contribution to N1), kept for decay fitting."""

    t: float
    m1: float
    m2: float
    n1: float
    n2: float
    energy: float
    min_coercivity_margin: float
    divergence_residual: float | None = None
    dinf: float = 0.0
    detail: object = None


@dataclass
class NormsDetail:
    """Per-product breakdown: orders[i] is the number of vector fields in
    product i; the arrays are the L2/sup norms of the product and of its
    full gradient."""

    orders: np.ndarray
    l2_val: np.ndarray
    l2_grad: np.ndarray
    linf_val: np.ndarray
    linf_grad: np.ndarray

    def norm_sums(self, max_order: int):
        sel = self.orders <= max_order
        return (float(np.sum(self.l2_grad[sel])), float(np.sum(self.l2_val[sel])),
                float(np.sum(self.linf_grad[sel])), float(np.sum(self.linf_val[sel])))


@dataclass
class EnergySample:
    """Per-record ingredients of the energy inequality: the graph's
    first-derivative L2 norm, the measured equation residual norm (the
    source term), and the sup norm of the coefficient derivatives."""

    t: float
    grad_l2: float
    source_l2: float
    dh_inf: float


def _field_tables(n: int):
    dim = n + 1
    fields = lorentz_fields(n)
    nZ = len(fields)
    codes = np.stack([z.coeff_codes(dim) for z in fields])
    amats = np.stack([z.amatrix(dim) for z in fields])
    pair_alpha = np.full((nZ, nZ), -1, dtype=np.int64)
    idx = 1 + nZ
    for a in range(nZ):
        for b in range(a, nZ):
            pair_alpha[a, b] = idx
            idx += 1
    return fields, codes, amats, pair_alpha, idx


def compute_norms(state: FieldState, ddf_supplier=None, dddf_supplier=None,
                  workers: int = 1, bundle: DerivativeBundle | None = None) -> NormsRecord:
    """Truncated weighted norms of one state: products of at most two
    Lorentz fields, L2 and sup norms of the products and their full
    spacetime gradients, summed per truncation level."""
    g = state.grid
    if bundle is None:
        bundle = build_bundle(state, need_third=True, ddf_supplier=ddf_supplier,
                              dddf_supplier=dddf_supplier, workers=workers)
    if bundle.D3 is None:
        raise ValueError("norms need a bundle built with third derivatives")
    dim, q, M = g.n + 1, g.q, g.num_cells
    fields, codes, amats, pair_alpha, n_alpha = _field_tables(g.n)
    nZ = len(fields)
    linelen = g.points_per_axis
    nlines = M // linelen
    ssv = np.zeros((nlines, n_alpha))
    ssg = np.zeros((nlines, n_alpha))
    mxv = np.zeros((nlines, n_alpha))
    mxg = np.zeros((nlines, n_alpha))
    coords = np.stack([x.reshape(-1) for x in g.coord_grids()])
    kernels.norms_accumulate(
        bundle.f.reshape(q, M), bundle.D1.reshape(dim, q, M),
        bundle.D2.reshape(-1, q, M), bundle.D3.reshape(-1, q, M),
        coords, bundle.t, codes, amats, pair_alpha,
        bundle.pack2, bundle.pack3, linelen,
        ssv, ssg, mxv, mxg)
    vol = g.cell_volume
    l2v = np.array([np.sqrt(pairwise_sum(ssv[:, al]) * vol) for al in range(n_alpha)])
    l2g = np.array([np.sqrt(pairwise_sum(ssg[:, al]) * vol) for al in range(n_alpha)])
    liv = np.sqrt(np.max(mxv, axis=0))
    lig = np.sqrt(np.max(mxg, axis=0))
    orders = np.array([0] + [1] * nZ + [2] * (n_alpha - 1 - nZ))
    detail = NormsDetail(orders=orders, l2_val=l2v, l2_grad=l2g,
                         linf_val=liv, linf_grad=lig)
    m1, m2, _, _ = detail.norm_sums(2)
    _, _, n1, _ = detail.norm_sums(1)
    _, _, _, n2 = detail.norm_sums(2)
    return NormsRecord(
        t=bundle.t, m1=m1, m2=m2, n1=n1, n2=n2,
        energy=float(l2g[0]),
        min_coercivity_margin=bundle.min_margin,
        dinf=float(lig[0]),
        detail=detail,
    )


def energy_sample(state: FieldState, bundle: DerivativeBundle,
                  workers: int = 1) -> EnergySample:
    """Energy-inequality ingredients at one time."""
    g = state.grid
    dim, q, M = g.n + 1, g.q, g.num_cells
    grad_l2 = reduce_norms(bundle.D1, "L2", g)
    if bundle.pde_residual is not None:
        source = sum(reduce_norms(bundle.pde_residual[I], "L2", g) for I in range(q))
    else:
        source = float("nan")
    # sup |dH|: spatial derivatives of the packed components by stencil,
    # the time derivative by a complex step through the same algebra
    nsym2 = dim * (dim + 1) // 2
    Hp = np.empty((nsym2, q, q, M))
    margin_dummy = np.empty(M)
    dfm = bundle.D1.reshape(dim, q, M)
    kernels.principal_fields(dfm, dim, Hp, margin_dummy)
    wrap = kernels.wrap_table(g.points_per_axis)
    stack = Hp.reshape(nsym2 * q * q, *g.shape)
    dh = 0.0
    for ax in range(g.n):
        dh = max(dh, float(np.max(np.abs(_d1_stack(stack, ax, g, wrap)))))
    eps = COMPLEX_STEP
    df_t = np.concatenate([bundle.ddf[None], bundle.dkv], axis=0)
    df_c = dfm.astype(np.complex128) + 1j * eps * df_t.reshape(dim, q, M)
    Hc = np.empty((nsym2, q, q, M), dtype=np.complex128)
    kernels.principal_fields(df_c, dim, Hc, np.empty(0))
    dh = max(dh, float(np.max(np.abs(Hc.imag)) / eps))
    return EnergySample(t=bundle.t, grad_l2=float(grad_l2),
                        source_l2=float(source), dh_inf=dh)


def compute_norms_record(state: FieldState, workers: int = 1) -> NormsRecord:
    return compute_norms(state, workers=workers)


def energy_monitor_sample(state: FieldState, workers: int = 1) -> EnergySample:
    bundle = build_bundle(state, need_third=False, workers=workers)
    return energy_sample(state, bundle, workers)


def full_record(state: FieldState, workers: int = 1):
    """Norms record and energy sample sharing one derivative bundle."""
    bundle = build_bundle(state, need_third=True, workers=workers)
    rec = compute_norms(state, bundle=bundle, workers=workers)
    sample = energy_sample(state, bundle, workers)
    return rec, sample


# ---------------------------------------------------------------------------
# Energy inequality


def cumulative_trapezoid(ts: np.ndarray, ys: np.ndarray) -> np.ndarray:
    out = np.zeros_like(ys)
    out[1:] = np.cumsum(0.5 * (ys[1:] + ys[:-1]) * np.diff(ts))
    return out


def energy_and_inequality(samples: list) -> np.ndarray:
    """Margin series of the two-sided energy estimate with its literal
    constants: margin(t) = 2 (E(0) + int source) exp(2 int |dH|) - E(t).

    Nonnegative margins (up to discretization error) instantiate the
    estimate; the source term is the measured equation residual, which is
    near zero for evolved solutions."""
    if len(samples) < 2:
        raise IncompleteSeries("need at least two samples")
    ts = np.array([s.t for s in samples])
    if np.any(np.diff(ts) <= 0):
        raise IncompleteSeries("samples must be strictly increasing in time")
    gaps = np.diff(ts)
    if np.max(gaps) > 2.5 * float(np.median(gaps)) + 1e-12:
        raise IncompleteSeries(
            f"cadence gap {np.max(gaps):.3g} exceeds tolerance vs median {np.median(gaps):.3g}")
    E = np.array([s.grad_l2 for s in samples])
    S = np.array([s.source_l2 for s in samples])
    D = np.array([s.dh_inf for s in samples])
    int_s = cumulative_trapezoid(ts, S)
    int_d = cumulative_trapezoid(ts, D)
    rhs = 2.0 * (E[0] + int_s) * np.exp(2.0 * int_d)
    return rhs - E


# ---------------------------------------------------------------------------
# Null forms


@dataclass(frozen=True)
class NullFormId:
    kind: str  # "q00" | "qab"
    alpha: int = 0
    beta: int = 0

    def __post_init__(self):
        if self.kind not in ("q00", "qab"):
            raise ValueError(f"unknown null form kind {self.kind!r}")
        if self.kind == "qab" and self.alpha == self.beta:
            raise ValueError("antisymmetric null form needs distinct indices")

    def __str__(self):
        return "Q00" if self.kind == "q00" else f"Q{self.alpha}{self.beta}"


def null_form(Q: NullFormId, u, w) -> np.ndarray:
    """Pointwise null form of two differentiable fields."""
    if Q.kind == "q00":
        n = u.grid.n
        out = -u.d1(0) * w.d1(0)
        for k in range(1, n + 1):
            out = out + u.d1(k) * w.d1(k)
        return out
    a, b = Q.alpha, Q.beta
    return u.d1(a) * w.d1(b) - u.d1(b) * w.d1(a)


def null_form_time_derivative(Q: NullFormId, u, w) -> np.ndarray:
    if Q.kind == "q00":
        n = u.grid.n
        out = -(u.d2(0, 0) * w.d1(0) + u.d1(0) * w.d2(0, 0))
        for k in range(1, n + 1):
            out = out + u.d2(0, k) * w.d1(k) + u.d1(k) * w.d2(0, k)
        return out
    a, b = Q.alpha, Q.beta
    return (u.d2(0, a) * w.d1(b) + u.d1(a) * w.d2(0, b)
            - u.d2(0, b) * w.d1(a) - u.d1(b) * w.d2(0, a))


def null_form_field(Q: NullFormId, u, w) -> SampledField:
    periodic = getattr(u, "periodic", True) and getattr(w, "periodic", True)
    return SampledField(u.grid, u.t, null_form(Q, u, w),
                        dt=null_form_time_derivative(Q, u, w),
                        periodic=periodic)


def null_basis(n: int) -> list:
    basis = [NullFormId("q00")]
    basis += [NullFormId("qab", a, b) for a in range(n + 1) for b in range(a + 1, n + 1)]
    return basis


def null_commutation_table(Z: VectorField, n: int) -> dict:
    """Exact commutation coefficients: Z Q(u,w) = Q(Zu,w) + Q(u,Zw) +
    sum_B a_B Q_B(u,w) over the null-form basis.  Derived algebraically
    from the affine coefficient matrix; entries land in {0, +-1, -2}."""
    dim = n + 1
    A = Z.amatrix(dim)
    eta = geometry.minkowski_diag(dim)
    table = {}

    def add(key, coeff):
        if abs(coeff) > 0:
            table[key] = table.get(key, 0.0) + coeff
            if table[key] == 0.0:
                del table[key]

    # scalar form: correction -(B + B^T) with B = A eta^{-1}
    B = A * eta[None, :]
    S = B + B.T
    diag = np.diag(S) / eta
    s = diag[0]
    if np.allclose(S, s * np.diag(eta), atol=1e-14) and abs(s) > 0:
        add(("q00",), -s)
    elif not np.allclose(S, 0.0, atol=1e-14):
        raise ValueError(f"correction of the scalar null form not in the basis for {Z}")
    table_q00 = dict(table)

    tables = {("q00",): table_q00}
    for alpha in range(dim):
        for beta in range(alpha + 1, dim):
            tab = {}

            def add_ab(mu, nu, coeff, tab=tab):
                if mu == nu or coeff == 0.0:
                    return
                if mu < nu:
                    key = ("qab", mu, nu)
                    tab[key] = tab.get(key, 0.0) + coeff
                else:
                    key = ("qab", nu, mu)
                    tab[key] = tab.get(key, 0.0) - coeff
                if key in tab and tab[key] == 0.0:
                    del tab[key]

            for lam in range(dim):
                add_ab(lam, beta, -A[lam, alpha])
                add_ab(alpha, lam, -A[lam, beta])
            tables[("qab", alpha, beta)] = tab
    for tab in tables.values():
        for coeff in tab.values():
            if coeff not in (-2.0, -1.0, 1.0, 2.0):
                raise ValueError(f"unexpected commutation coefficient {coeff}")
    return tables


def z_commutation_defect(Z: VectorField, Q: NullFormId, u, w) -> float:
    """Max deviation of Z Q(u,w) - Q(Zu,w) - Q(u,Zw) - (table terms) on
    the fields' common interior."""
    n = u.grid.n
    key = ("q00",) if Q.kind == "q00" else ("qab", Q.alpha, Q.beta)
    table = null_commutation_table(Z, n)[key]
    qfield = null_form_field(Q, u, w)
    lhs = apply_vector_field(Z, qfield)
    zu = ZField(Z, u)
    zw = ZField(Z, w)
    rhs = null_form(Q, zu, w) + null_form(Q, u, zw)
    for bkey, coeff in table.items():
        Qb = NullFormId("q00") if bkey[0] == "q00" else NullFormId("qab", bkey[1], bkey[2])
        rhs = rhs + coeff * null_form(Qb, u, w)
    mask = u.interior_mask() & w.interior_mask()
    return float(np.max(np.abs(lhs - rhs)[mask]))


def null_estimate_ratio(Q: NullFormId, u, w, floor: float = 1e-30) -> float:
    """Empirical constant of the pointwise null-form estimate: the max of
    |Q(u,w)| (1 + t + |x|) over the product of summed first-order field
    magnitudes."""
    grid = u.grid
    t = u.t
    fields = lorentz_fields(grid.n)
    num = np.abs(null_form(Q, u, w)) * (1.0 + t + grid.radius_grid())
    su = np.zeros(grid.shape)
    sw = np.zeros(grid.shape)
    for Z in fields:
        su += np.abs(apply_vector_field(Z, u))
        sw += np.abs(apply_vector_field(Z, w))
    mask = u.interior_mask() & w.interior_mask()
    return float(np.max((num / (su * sw + floor))[mask]))


# ---------------------------------------------------------------------------
# Determinant expansion


def det_expansion_remainder(df: np.ndarray, eps: float) -> float:
    """|(-det h)(eps df) - 1 - eps^2 sum_I Q00(f^I, f^I)| at one jet."""
    dim = df.shape[0]
    eta = geometry.minkowski_diag(dim)
    h = geometry.induced_metric(eps * df)
    det, _ = geometry.det_and_inverse(h)
    q00 = float(np.einsum("m,mi,mi->", eta, df, df))
    return float(np.abs(-det - 1.0 - eps * eps * q00))


def quartic_expansion_coefficient(df: np.ndarray) -> tuple:
    """Exact coefficient of the quartic term of -det h along eps*df (the
    second elementary symmetric function of the Gram matrix) and the Gram
    scale.  Jets with a tiny coefficient sit near a measure-zero set where
    the Richardson order of the remainder is ill-conditioned."""
    eta = geometry.minkowski_diag(df.shape[0])
    G = np.einsum("m,mi,mj->ij", eta, df, df)
    e2 = 0.5 * (np.trace(G) ** 2 - np.trace(G @ G))
    return float(e2), float(np.sum(G * G))


def generic_expansion_jet(rng, n: int, q: int, scale: float = 1.0) -> np.ndarray:
    """Random jet kept away from the degenerate quartic set."""
    while True:
        df = rng.uniform(-scale, scale, size=(n + 1, q))
        e2, gnorm = quartic_expansion_coefficient(df)
        if abs(e2) >= 0.05 * gnorm:
            return df


def det_expansion_check(df: np.ndarray, eps_values=(0.1, 0.05, 0.025)) -> dict:
    """Richardson orders of the expansion remainder along eps -> eps/2;
    quartic vanishing gives orders near 4."""
    remainders = [det_expansion_remainder(df, e) for e in eps_values]
    orders = []
    for r1, r2 in zip(remainders, remainders[1:]):
        if r2 == 0.0 or r1 == 0.0:
            orders.append(float("inf") if r1 == 0.0 or r2 == 0.0 else 0.0)
        else:
            orders.append(float(np.log2(r1 / r2) / np.log2(eps_values[0] / eps_values[1])))
    return {"eps": list(eps_values), "remainders": remainders, "orders": orders}


# ---------------------------------------------------------------------------
# Decay fitting

_T_975 = {1: 12.706, 2: 4.303, 3: 3.182, 4: 2.776, 5: 2.571, 6: 2.447,
          7: 2.365, 8: 2.306, 9: 2.262, 10: 2.228, 11: 2.201, 12: 2.179,
          13: 2.160, 14: 2.145, 15: 2.131, 16: 2.120, 17: 2.110, 18: 2.101,
          19: 2.093, 20: 2.086, 21: 2.080, 22: 2.074, 23: 2.069, 24: 2.064,
          25: 2.060, 26: 2.056, 27: 2.052, 28: 2.048, 29: 2.045, 30: 2.042}


@dataclass
class DecayFit:
    exponent: float
    halfwidth: float
    n_samples: int


def decay_fit(ts, values) -> DecayFit:
    """Least-squares slope of log(value) against log(1 + t) with the
    half-width of its 95% interval under i.i.d. residuals."""
    ts = np.asarray(ts, dtype=float)
    values = np.asarray(values, dtype=float)
    if ts.shape != values.shape or ts.ndim != 1 or ts.size < 3:
        raise ValueError("need matching 1D series with at least 3 samples")
    if np.any(values <= 0.0):
        raise DegenerateSeries("decay fit needs strictly positive samples")
    x = np.log1p(ts)
    y = np.log(values)
    xm = x - x.mean()
    sxx = float(np.dot(xm, xm))
    if sxx == 0.0:
        raise ValueError("degenerate abscissa")
    slope = float(np.dot(xm, y) / sxx)
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    dof = ts.size - 2
    sigma2 = float(np.dot(resid, resid)) / dof
    se = np.sqrt(sigma2 / sxx)
    tq = _T_975.get(dof, 1.96)
    return DecayFit(exponent=slope, halfwidth=float(tq * se), n_samples=ts.size)

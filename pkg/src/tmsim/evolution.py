"""Time integration of the quasilinear graph system.

The evolved form solves the q x q time-time coefficient block for the
second time derivative at every cell (the direct numerical analogue of the
symmetric-hyperbolic structure); the divergence form is demoted to a
cadenced residual cross-check.  Classical RK4 in time, method of lines.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import geometry, kernels
from .errors import CoercivityLost, NonFinite, SingularBlock, SpacelikeDegeneration
from .grid import FieldState, diff1, diff2, jet_grid, pairwise_sum, reduce_norms

DEFAULT_CFL = 0.2
MAX_CFL = 0.25

STATUS_OK = "OK"
STATUS_COERCIVITY_LOST = "CoercivityLost"
STATUS_NON_FINITE = "NonFinite"


@dataclass
class StepReport:
    """Per-step monitor sample; min_coercivity_margin is the grid minimum
    of the hyperbolicity margin seen by the first RK stage."""

    t: float
    dt: float
    min_coercivity_margin: float
    max_abs_ddf: float
    divergence_residual: float | None = None
    status: str = STATUS_OK


@dataclass
class EvolutionResult:
    status: str
    final_state: FieldState
    step_reports: list = field(default_factory=list)
    norms_records: list = field(default_factory=list)
    energy_series: list = field(default_factory=list)  # (t, grad_l2, source_l2, dH_inf)
    offending_cell: tuple | None = None
    termination_t: float | None = None


def parallel_map(tasks, workers: int = 1):
    """Run zero-arg callables, collecting results in submission order.

    Every task writes into its own preallocated output, so the result is
    bit-identical for any worker count.
    """
    if workers <= 1 or len(tasks) <= 1:
        return [t() for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(t) for t in tasks]
        return [f.result() for f in futures]


def _unravel(grid, flat_cell):
    return tuple(int(v) for v in np.unravel_index(int(flat_cell), grid.shape))


def state_derivatives(state: FieldState, workers: int = 1):
    """Fused stencil pass: full first-derivative jet, spatial derivatives
    of v, and packed spatial second derivatives of f.

    Returns (df (n+1, q, grid), dkv (n, q, grid), d2f (n(n+1)/2, q, grid)).
    """
    g = state.grid
    n, q, shape = g.n, g.q, g.shape
    nsym = n * (n + 1) // 2
    df = np.empty((n + 1, q) + shape)
    dkv = np.empty((n, q) + shape)
    d2f = np.empty((nsym, q) + shape)
    df[0] = state.v
    wrap = kernels.wrap_table(g.points_per_axis)
    if n == 2:
        kernels.derivs_uw_2d(state.f, state.v, g.dx, wrap, df[1:], d2f, dkv)
    elif n == 3:
        kernels.derivs_uw_3d(state.f, state.v, g.dx, wrap, df[1:], d2f, dkv)
    else:
        pairs = kernels.sym2_pairs(n)
        for k in range(n):
            for I in range(q):
                df[k + 1, I] = diff1(state.f[I], k, g.dx)
                dkv[k, I] = diff1(state.v[I], k, g.dx)
        for p, (a, b) in enumerate(pairs):
            for I in range(q):
                if a == b:
                    d2f[p, I] = diff2(state.f[I], a, g.dx)
                else:
                    d2f[p, I] = diff1(df[a + 1, I], b, g.dx)
    return df, dkv, d2f


def _rhs_full(state: FieldState, want_residual: bool = False, derivs=None):
    """Solve for d_tt f everywhere.  Returns (a, min_margin, max_abs_a,
    residual or None).  Raises on precondition failure."""
    state.require_finite()
    g = state.grid
    dim = g.n + 1
    df, dkv, d2f = derivs if derivs is not None else state_derivatives(state)
    M = g.num_cells
    a = np.empty((g.q, M))
    res = np.empty((g.q, M)) if want_residual else np.empty((g.q, 0))
    pair2 = kernels.sym2_index(g.n)
    status, cell, margin, max_abs_a, detmag = kernels.rhs_checked(
        df.reshape(dim, g.q, M),
        dkv.reshape(g.n, g.q, M),
        d2f.reshape(-1, g.q, M),
        dim,
        pair2,
        a,
        res,
        want_residual,
    )
    if status == kernels.STATUS_SPACELIKE:
        raise SpacelikeDegeneration(margin, _unravel(g, cell))
    if status == kernels.STATUS_COERCIVITY:
        raise CoercivityLost(_unravel(g, cell), margin, t=state.t)
    if status == kernels.STATUS_SINGULAR_BLOCK:
        raise SingularBlock(f"time-time block |det| = {detmag} at cell {_unravel(g, cell)}")
    a = a.reshape((g.q,) + g.shape)
    residual = res.reshape((g.q,) + g.shape) if want_residual else None
    return a, margin, max_abs_a, residual


def second_time_derivative(state: FieldState) -> np.ndarray:
    """d_tt f from the symmetric form: per cell, solve the q x q time-time
    block against the mixed and spatial second-derivative terms."""
    return _rhs_full(state)[0]


def second_time_derivative_reference(state: FieldState) -> np.ndarray:
    """Pure-numpy cross-check of the compiled RHS (small grids only)."""
    state.require_finite()
    g = state.grid
    df, dkv, d2f = state_derivatives(state)
    H = geometry.principal_coefficient(df)
    margin = geometry.coercivity_margin(H)
    if np.min(margin) <= 0.0:
        cell = np.unravel_index(int(np.argmin(margin)), g.shape)
        raise CoercivityLost(tuple(int(c) for c in cell), float(np.min(margin)), t=state.t)
    pair2 = kernels.sym2_index(g.n)
    b = np.zeros((g.q,) + g.shape)
    for k in range(g.n):
        b -= 2.0 * np.einsum("jl...,j...->l...", H[0, k + 1], dkv[k])
    for a_ax in range(g.n):
        for b_ax in range(a_ax, g.n):
            w = 1.0 if a_ax == b_ax else 2.0
            b -= w * np.einsum(
                "jl...,j...->l...", H[a_ax + 1, b_ax + 1], d2f[pair2[a_ax, b_ax]]
            )
    H00 = np.moveaxis(H[0, 0].reshape(g.q, g.q, -1), -1, 0)
    rhs = np.moveaxis(b.reshape(g.q, -1), -1, 0)
    sol = np.linalg.solve(H00, rhs[..., None])[..., 0]
    return np.moveaxis(sol, 0, -1).reshape((g.q,) + g.shape)


def linear_second_time_derivative(state: FieldState) -> np.ndarray:
    """Flat-wave right-hand side (spatial Laplacian), same stencils."""
    g = state.grid
    _, _, d2f = state_derivatives(state)
    pair2 = kernels.sym2_index(g.n)
    a = d2f[pair2[0, 0]].copy()
    for k in range(1, g.n):
        a += d2f[pair2[k, k]]
    return a


def rk4_step(state: FieldState, dt: float, rhs=None) -> FieldState:
    """Classical four-stage Runge-Kutta on (f, v) -> (v, rhs)."""
    if rhs is None:
        rhs = second_time_derivative
    g = state.grid
    f0, v0, t0 = state.f, state.v, state.t

    k1f = v0
    k1v = rhs(state)
    s2 = FieldState(g, t0 + 0.5 * dt, f0 + (0.5 * dt) * k1f, v0 + (0.5 * dt) * k1v)
    k2f = s2.v
    k2v = rhs(s2)
    s3 = FieldState(g, t0 + 0.5 * dt, f0 + (0.5 * dt) * k2f, v0 + (0.5 * dt) * k2v)
    k3f = s3.v
    k3v = rhs(s3)
    s4 = FieldState(g, t0 + dt, f0 + dt * k3f, v0 + dt * k3v)
    k4f = s4.v
    k4v = rhs(s4)

    f1 = f0 + (dt / 6.0) * (k1f + 2.0 * k2f + 2.0 * k3f + k4f)
    v1 = v0 + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return FieldState(g, t0 + dt, f1, v1)


def flux_jet(state: FieldState, workers: int = 1) -> np.ndarray:
    """Divergence-form flux vector (the quadratically-small coefficient
    contracted with the jet), shape (n+1, q, grid)."""
    g = state.grid
    df = jet_arrays(state, workers)
    dim = g.n + 1
    phi = np.empty_like(df)
    kernels.flux_vector(df.reshape(dim, g.q, -1), dim, phi.reshape(dim, g.q, -1))
    return phi


def jet_arrays(state: FieldState, workers: int = 1) -> np.ndarray:
    """First-derivative jet only (no second derivatives)."""
    g = state.grid
    df = np.empty((g.n + 1, g.q) + g.shape)
    df[0] = state.v
    wrap = kernels.wrap_table(g.points_per_axis)
    if g.n == 2:
        tasks = [
            (lambda k=k: kernels.d1_axis_2d(state.f, k, g.dx, wrap, df[k + 1]))
            for k in range(g.n)
        ]
        parallel_map(tasks, workers)
    elif g.n == 3:
        tasks = [
            (lambda k=k: kernels.d1_axis_3d(state.f, k, g.dx, wrap, df[k + 1]))
            for k in range(g.n)
        ]
        parallel_map(tasks, workers)
    else:
        for k in range(g.n):
            for I in range(g.q):
                df[k + 1, I] = diff1(state.f[I], k, g.dx)
    return df


def divergence_residual(prev: FieldState, cur: FieldState, nxt: FieldState,
                        workers: int = 1) -> float:
    """L2 residual of the divergence form at the middle state.

    The flat wave operator uses the PDE-solved second time derivative plus
    stencil Laplacian; the flux time derivative is centered across the
    three levels (the only place any quantity is differenced in time).
    Returns the max over field components of the L2 norm.
    """
    g = cur.grid
    dt_m = cur.t - prev.t
    dt_p = nxt.t - cur.t
    if abs(dt_m - dt_p) > 1e-9 * max(abs(dt_m), abs(dt_p)):
        raise ValueError("divergence residual needs equispaced time levels")
    derivs = state_derivatives(cur, workers)
    a, _, _, _ = _rhs_full(cur, derivs=derivs)
    _, _, d2f = derivs
    pair2 = kernels.sym2_index(g.n)
    box = -a
    for k in range(g.n):
        box = box + d2f[pair2[k, k]]
    tasks = [
        (lambda s=prev: flux_jet(s, workers)),
        (lambda s=cur: flux_jet(s, workers)),
        (lambda s=nxt: flux_jet(s, workers)),
    ]
    phi_prev, phi_cur, phi_next = parallel_map(tasks, workers)
    div = (phi_next[0] - phi_prev[0]) / (dt_m + dt_p)
    for k in range(g.n):
        for I in range(g.q):
            div[I] = div[I] + diff1(phi_cur[k + 1, I], k, g.dx)
    worst = 0.0
    for I in range(g.q):
        worst = max(worst, reduce_norms(box[I] - div[I], "L2", g))
    return worst


def evolve(config, data: FieldState, snapshot_writer=None,
           diag_fn=None) -> EvolutionResult:
    """Advance the state to t_final or until the continuation criterion
    fails.  Emits per-step reports, cadenced norms records, and the
    energy-monitor series; on coercivity loss the result carries the final
    state and the offending cell for post-mortem.

    ``config`` needs attributes cfl, t_final, diag_cadence,
    snapshot_cadence, workers.  ``snapshot_writer(state, step)`` is called
    per snapshot cadence; ``diag_fn(state, workers) -> (record, sample)``
    computes one norms record and one energy-monitor sample (defaults to
    diagnostics.full_record, which shares a single derivative bundle).
    """
    from .diagnostics import full_record

    if diag_fn is None:
        diag_fn = full_record

    g = data.grid
    cfl = getattr(config, "cfl", DEFAULT_CFL)
    if not (0.0 < cfl <= MAX_CFL):
        raise ValueError(f"cfl must be in (0, {MAX_CFL}], got {cfl}")
    workers = getattr(config, "workers", 1)
    dt = cfl * g.dx
    t_final = config.t_final
    n_steps = max(int(np.ceil(t_final / dt - 1e-9)), 1)
    diag_cadence = max(int(getattr(config, "diag_cadence", 10)), 1)
    snap_cadence = int(getattr(config, "snapshot_cadence", 0))

    result = EvolutionResult(status=STATUS_OK, final_state=data)
    state = data.copy()

    record_steps = sorted(set(range(0, n_steps + 1, diag_cadence)) | {n_steps})
    # each record needs three consecutive equispaced time levels for the
    # flux time derivative; endpoint records use the nearest clean triple
    # (a clipped final step is excluded, its spacing differs)
    ragged_last = abs((t_final - (n_steps - 1) * dt) - dt) > 1e-9 * dt
    max_clean = n_steps - 1 if ragged_last else n_steps
    trio_of = {}
    for r in record_steps:
        if max_clean >= 2:
            lo = min(max(r - 1, 0), max_clean - 2)
            trio_of[r] = (lo, lo + 1, lo + 2)
        else:
            trio_of[r] = None

    ring = {}      # step -> state kept for residual triples
    pending = {}   # record step -> record awaiting its residual
    settled = set()

    def keep_if_needed(step, st):
        for r in record_steps:
            if r not in settled and trio_of[r] is not None and step in trio_of[r]:
                ring[step] = st
                return

    def settle(final=False):
        for r in list(pending):
            trio = trio_of[r]
            if trio is not None and all(s in ring for s in trio):
                pending[r].divergence_residual = divergence_residual(
                    ring[trio[0]], ring[trio[1]], ring[trio[2]], workers)
            elif not final:
                continue
            else:
                pending[r].divergence_residual = float("nan")
            result.norms_records.append(pending.pop(r))
            settled.add(r)
        alive = set()
        for r in record_steps:
            if r not in settled and trio_of[r] is not None:
                alive.update(trio_of[r])
        for s in list(ring):
            if s not in alive:
                del ring[s]

    def make_record(step, st):
        rec, sample = diag_fn(st, workers=workers)
        pending[step] = rec
        result.energy_series.append(sample)

    try:
        keep_if_needed(0, state)
        make_record(0, state)
        if snapshot_writer is not None and snap_cadence > 0:
            snapshot_writer(state, 0)

        for step in range(n_steps):
            step_dt = dt if step < n_steps - 1 else t_final - step * dt
            a, min_margin, max_abs_a, _ = _rhs_full(state, derivs=None)
            state = _rk4_with_first_stage(state, step_dt, a)
            state.t = (step + 1) * dt if step < n_steps - 1 else t_final
            result.step_reports.append(StepReport(
                t=state.t, dt=step_dt,
                min_coercivity_margin=min_margin,
                max_abs_ddf=max_abs_a,
            ))
            k = step + 1
            keep_if_needed(k, state)
            if k in trio_of and k not in settled and k not in pending:
                make_record(k, state)
            if snapshot_writer is not None and snap_cadence > 0 and (
                    k % snap_cadence == 0 or k == n_steps):
                snapshot_writer(state, k)
            settle()
    except (CoercivityLost, SpacelikeDegeneration) as err:
        result.status = STATUS_COERCIVITY_LOST
        result.offending_cell = getattr(err, "cell", None)
        result.termination_t = state.t
        if snapshot_writer is not None:
            snapshot_writer(state, -1)
    except NonFinite:
        result.status = STATUS_NON_FINITE
        result.termination_t = state.t
    settle(final=True)
    result.norms_records.sort(key=lambda r: r.t)
    result.final_state = state
    return result


def _rk4_with_first_stage(state: FieldState, dt: float, k1v: np.ndarray) -> FieldState:
    """RK4 step reusing an already-computed first-stage RHS."""
    g = state.grid
    f0, v0, t0 = state.f, state.v, state.t
    k1f = v0
    s2 = FieldState(g, t0 + 0.5 * dt, f0 + (0.5 * dt) * k1f, v0 + (0.5 * dt) * k1v)
    k2f = s2.v
    k2v = second_time_derivative(s2)
    s3 = FieldState(g, t0 + 0.5 * dt, f0 + (0.5 * dt) * k2f, v0 + (0.5 * dt) * k2v)
    k3f = s3.v
    k3v = second_time_derivative(s3)
    s4 = FieldState(g, t0 + dt, f0 + dt * k3f, v0 + dt * k3v)
    k4f = s4.v
    k4v = second_time_derivative(s4)
    f1 = f0 + (dt / 6.0) * (k1f + 2.0 * k2f + 2.0 * k3f + k4f)
    v1 = v0 + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return FieldState(g, t0 + dt, f1, v1)


def linear_wave_evolve(data: FieldState, t_final: float, cfl: float = DEFAULT_CFL) -> FieldState:
    """Flat-wave evolution of the same data with the same stepper; the
    comparison baseline for the cubic-smallness checks."""
    g = data.grid
    dt = cfl * g.dx
    n_steps = max(int(np.ceil(t_final / dt - 1e-9)), 1)
    state = data.copy()
    for step in range(n_steps):
        step_dt = dt if step < n_steps - 1 else t_final - step * dt
        state = rk4_step(state, step_dt, rhs=linear_second_time_derivative)
    state.t = t_final
    return state

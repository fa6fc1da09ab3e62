"""Run orchestration: the evolve driver with artifacts, the property-check
suites, and the convergence / decay harnesses."""

from __future__ import annotations

import os
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import diagnostics as diag
from . import evolution as ev
from . import geometry
from . import initial_data as idata
from . import snapshots
from .config import SimConfig
from .errors import TmsimError, ValidationError
from .grid import FieldState, GridSpec, reduce_norms
from .vectorfields import (SampledField, battery_fields, commutator_check,
                           lorentz_fields, structure_constants)

OUTPUT_DIR_ENV = "TMSIM_OUTPUT_DIR"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_COERCIVITY_LOST = 2


def resolve_output_dir(config: SimConfig) -> Path:
    override = os.environ.get(OUTPUT_DIR_ENV)
    return Path(override) if override else Path(config.output_dir)


def run_evolve(config: SimConfig, echo=print) -> int:
    """Evolve per config, writing norms.csv, snapshots, and the manifest.

    Exit status 0 on a completed run, 2 when the continuation criterion
    failed (coercivity lost; the manifest names the offending cell), 1 on
    operational errors.
    """
    out_dir = resolve_output_dir(config)
    written = []
    t_start = time.time()
    meta = {"tmsim_version": __version__, "format_version": snapshots.FORMAT_VERSION}

    def manifest(status, extra=None):
        meta2 = dict(meta)
        meta2["status"] = status
        meta2["wall_time_s"] = f"{time.time() - t_start:.3f}"
        if extra:
            meta2.update(extra)
        meta2["files"] = ";".join(written) if written else "none"
        snapshots.write_manifest(out_dir / "run_manifest.txt", config, meta2)

    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        grid = config.grid()
        data = idata.realize(config.family(), grid)

        def writer(state, step):
            name = "snap_final.tmsb" if step < 0 else f"snap_{step:06d}.tmsb"
            snapshots.write_snapshot(out_dir / name, state)
            written.append(name)

        result = ev.evolve(config, data, snapshot_writer=writer)
        snapshots.write_norms_csv(out_dir / "norms.csv", result.norms_records)
        written.append("norms.csv")
        extra = {"steps": len(result.step_reports)}
        if len(result.energy_series) >= 2:
            margins = diag.energy_and_inequality(result.energy_series)
            extra["min_energy_margin"] = repr(float(np.min(margins)))
        if result.status == ev.STATUS_COERCIVITY_LOST:
            extra["offending_cell"] = ",".join(str(c) for c in (result.offending_cell or ()))
            extra["termination_t"] = repr(result.termination_t)
            manifest(result.status, extra)
            echo(f"continuation criterion failed at t={result.termination_t} "
                 f"cell={result.offending_cell}")
            return EXIT_COERCIVITY_LOST
        if result.status != ev.STATUS_OK:
            manifest(result.status, extra)
            echo(f"run failed: {result.status}")
            return EXIT_ERROR
        manifest(result.status, extra)
        echo(f"run complete: {len(result.step_reports)} steps, "
             f"{len(result.norms_records)} records -> {out_dir}")
        return EXIT_OK
    except OSError as exc:
        try:
            meta["incomplete"] = "true"
            manifest("IOError", {"error": str(exc)})
        except OSError:
            pass
        echo(f"I/O failure: {exc}")
        return EXIT_ERROR
    except TmsimError as exc:
        echo(f"error: {exc}")
        return EXIT_ERROR


# ---------------------------------------------------------------------------
# Property-check suites


class CheckReport:
    def __init__(self, echo=print):
        self.echo = echo
        self.failures = 0

    def check(self, name, measured, threshold, larger_ok=False):
        ok = measured >= threshold if larger_ok else measured <= threshold
        word = "PASS" if ok else "FAIL"
        rel = ">=" if larger_ok else "<="
        self.echo(f"  {word} {name}: {measured:.3e} {rel} {threshold:.3e}")
        if not ok:
            self.failures += 1
        return ok

    def check_range(self, name, measured, lo, hi):
        ok = lo <= measured <= hi
        word = "PASS" if ok else "FAIL"
        self.echo(f"  {word} {name}: {measured:.4g} in [{lo}, {hi}]")
        if not ok:
            self.failures += 1
        return ok


def random_jets(rng, n, q, count, scale=0.3):
    return rng.uniform(-scale, scale, size=(n + 1, q, count))


def check_identities(seed=0, echo=print) -> bool:
    """Algebraic structure of the pointwise geometry."""
    rep = CheckReport(echo)
    rng = np.random.default_rng(seed)
    total = 0
    worst_sym = 0.0
    worst_inv = 0.0
    for n in (2, 3):
        for q in (1, 2, 3):
            df = random_jets(rng, n, q, 200)
            total += df.shape[-1]
            H = geometry.principal_coefficient(df)
            scale = np.max(np.abs(H))
            worst_sym = max(worst_sym,
                            float(np.max(np.abs(H - H.transpose(1, 0, 2, 3, 4)))) / scale,
                            float(np.max(np.abs(H - H.transpose(0, 1, 3, 2, 4)))) / scale)
            h = geometry.induced_metric(df)
            det, hinv = geometry.det_and_inverse(h)
            eye = np.einsum("ij...,jk...->ik...", h, hinv)
            eye_exact = np.eye(n + 1).reshape(n + 1, n + 1, 1, )
            worst_inv = max(worst_inv, float(np.max(np.abs(eye - eye_exact))))
    echo(f"identities suite ({total} random jets)")
    rep.check("principal-coefficient symmetry (rel)", worst_sym, 1e-13)
    rep.check("metric times inverse vs identity", worst_inv, 1e-12)

    # quadratic vanishing of the coefficient tensors
    df = random_jets(rng, 3, 2, 50)
    for name, fn in (("flux", geometry.flux_coefficient),
                     ("principal deviation", lambda d: geometry.principal_coefficient(d)
                      - geometry.principal_coefficient(0.0 * d))):
        r1 = np.max(np.abs(fn(1e-2 * df))) / 1e-4
        r2 = np.max(np.abs(fn(1e-3 * df))) / 1e-6
        rep.check(f"{name} quadratic-order ratio drift", abs(r1 / r2 - 1.0), 2e-2)

    # null-direction determinant exactness
    worst = 0.0
    for n in (2, 3):
        ell = np.zeros(n + 1)
        ell[0] = 1.0
        ell[1] = -1.0
        for c in (0.05, 0.2, 0.4):
            det, _ = geometry.det_and_inverse(geometry.induced_metric((c * ell)[:, None]))
            worst = max(worst, abs(float(det) + 1.0))
    rep.check("null-direction det drift", worst, 1e-14)
    return rep.failures == 0


def check_commutators(seed=0, echo=print) -> bool:
    """Lie-algebra relations measured on the analytic battery."""
    rep = CheckReport(echo)
    echo("commutators suite")
    for n, N in ((2, 64), (3, 32)):
        grid = GridSpec(n=n, q=1, half_width=float(np.pi), points_per_axis=N)
        fields = battery_fields(grid, t=0.7)
        tol_poly = 1e-9
        tol_trig = 60.0 * grid.dx ** 4
        worst_poly = 0.0
        worst_trig = 0.0
        for name, f in fields.items():
            for Z in lorentz_fields(n):
                dev = commutator_check(Z, f)["max"]
                if name == "plane_wave":
                    worst_trig = max(worst_trig, dev)
                else:
                    worst_poly = max(worst_poly, dev)
        rep.check(f"n={n} polynomial battery deviation", worst_poly, tol_poly)
        rep.check(f"n={n} trigonometric battery deviation", worst_trig, tol_trig)
        allowed = {-1.0, 0.0, 1.0}
        values = set()
        for Z in lorentz_fields(n):
            values.update(np.unique(structure_constants(Z, n + 1)).tolist())
        ok = values <= allowed
        echo(f"  {'PASS' if ok else 'FAIL'} n={n} structure constants {sorted(values)} in {{0,+-1}}")
        if not ok:
            rep.failures += 1
    return rep.failures == 0


def check_nullforms(seed=0, echo=print) -> bool:
    """Null-form structure: vanishing on null gradients, antisymmetry,
    commutation with the vector fields against the derived tables."""
    rep = CheckReport(echo)
    echo("nullforms suite")
    n = 2
    grid = GridSpec(n=n, q=1, half_width=float(np.pi), points_per_axis=64)
    t = 0.6
    X = grid.coord_grids()
    # null-gradient field u = t - x^1
    u_null = SampledField(grid, t, t - X[0], dt=np.ones(grid.shape),
                          dtt=np.zeros(grid.shape), dttt=np.zeros(grid.shape),
                          periodic=False)
    q00 = diag.null_form(diag.NullFormId("q00"), u_null, u_null)
    mask = u_null.interior_mask()
    rep.check("scalar null form on null gradient", float(np.max(np.abs(q00[mask]))), 1e-13)

    fields = battery_fields(grid, t)
    u = fields["plane_wave"]
    w = fields["cone"]
    qab = diag.NullFormId("qab", 0, 1)
    qba = diag.NullFormId("qab", 1, 0)
    anti1 = np.max(np.abs(diag.null_form(qab, u, w) + diag.null_form(qba, u, w)))
    anti2 = np.max(np.abs(diag.null_form(qab, u, w) + diag.null_form(qab, w, u)))
    rep.check("antisymmetry in the index pair", float(anti1), 0.0)
    rep.check("antisymmetry in the arguments", float(anti2), 0.0)

    worst = 0.0
    for Z in lorentz_fields(n):
        for Q in diag.null_basis(n):
            worst = max(worst, diag.z_commutation_defect(Z, Q, u, w))
    rep.check("field commutation vs derived tables", worst, 200.0 * grid.dx ** 4)
    return rep.failures == 0


def check_expansion(seed=0, echo=print) -> bool:
    """Quartic remainder of the volume-element expansion."""
    rep = CheckReport(echo)
    echo("expansion suite")
    rng = np.random.default_rng(seed)
    # In codimension one the remainder vanishes identically (rank-one
    # determinant identity), so the quartic order is measured at q >= 2;
    # jets are kept clear of the degenerate set where the quartic
    # coefficient itself vanishes (order is ill-conditioned there).
    ok_orders = []
    for n in (2, 3):
        for q in (2, 3):
            for _ in range(20):
                df = diag.generic_expansion_jet(rng, n, q)
                res = diag.det_expansion_check(df, (0.1, 0.05, 0.025))
                ok_orders.extend(res["orders"])
    rep.check_range("generic remainder order (min)", float(np.min(ok_orders)), 3.7, 4.3)
    rep.check_range("generic remainder order (max)", float(np.max(ok_orders)), 3.7, 4.3)

    worst = 0.0
    for n in (2, 3):
        for _ in range(10):
            df = rng.uniform(-1.0, 1.0, size=(n + 1, 1))
            worst = max(worst, max(diag.det_expansion_remainder(df, e)
                                   for e in (0.5, 0.25, 0.1)))
    rep.check("codimension-one remainder (exact identity)", worst, 1e-14)

    # single spatial entry: remainder identically zero
    df = np.zeros((3, 1))
    df[1, 0] = 0.7
    worst = max(diag.det_expansion_remainder(df, e) for e in (0.5, 0.25, 0.1))
    rep.check("single-entry remainder", worst, 1e-15)
    # null direction: remainder zero at every amplitude
    ell = np.array([1.0, -1.0, 0.0])[:, None]
    worst = max(diag.det_expansion_remainder(ell, e) for e in (0.5, 0.25, 0.1))
    rep.check("null-direction remainder", worst, 1e-15)
    return rep.failures == 0


CHECK_SUITES = {
    "identities": check_identities,
    "commutators": check_commutators,
    "nullforms": check_nullforms,
    "expansion": check_expansion,
}


def run_check(suite: str, seed: int = 0, echo=print) -> int:
    if suite not in CHECK_SUITES:
        echo(f"unknown suite {suite!r}; available: {', '.join(sorted(CHECK_SUITES))}")
        return EXIT_ERROR
    ok = CHECK_SUITES[suite](seed=seed, echo=echo)
    echo(f"suite {suite}: {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_ERROR


# ---------------------------------------------------------------------------
# Convergence harness


def _restrict(fine: FieldState, coarse_grid: GridSpec) -> FieldState:
    """Injection onto the coarse grid (grids nest for factor-2 refinement)."""
    ratio = fine.grid.points_per_axis // coarse_grid.points_per_axis
    sl = (slice(None),) + (slice(None, None, ratio),) * fine.grid.n
    return FieldState(coarse_grid, fine.t, fine.f[sl].copy(), fine.v[sl].copy())


def run_convergence(config: SimConfig, refinements: int = 2, echo=print) -> int:
    """Evolve the same data at N, 2N (, 4N) to a common final time and
    report observed orders for the solution error and the divergence-form
    residual."""
    if refinements not in (2, 3):
        raise ValidationError("refinements", "must be 2 or 3")
    budget = 1024 if config.n == 2 else 256
    if config.N * 2 ** (refinements - 1) > budget:
        raise ValidationError("N", f"finest level {config.N * 2 ** (refinements - 1)} "
                              f"exceeds the n={config.n} memory budget {budget}")
    family = config.family()
    exact_kind = config.data_kind in ("null_wave", "linear_plane")
    levels = [config.N * 2 ** i for i in range(refinements)]
    finals = []
    residuals = []
    for N in levels:
        grid = GridSpec(n=config.n, q=config.q, half_width=config.L, points_per_axis=N)
        data = idata.realize(family, grid)
        result = ev.evolve(_override(config, N=N, diag_cadence=10 ** 9,
                                     snapshot_cadence=0), data)
        if result.status != ev.STATUS_OK:
            echo(f"level N={N} failed: {result.status}")
            return EXIT_ERROR
        finals.append(result.final_state)
        residuals.append([r.divergence_residual for r in result.norms_records
                          if r.divergence_residual is not None and np.isfinite(r.divergence_residual)][-1])

    echo(f"convergence harness: levels {levels}, t_final={config.t_final}")
    sol_errs = []
    if exact_kind:
        for st in finals:
            if config.data_kind == "null_wave":
                exact = idata.null_wave_exact(family, st.grid, st.t)
            else:
                exact = idata.realize(family, st.grid)
                exact.f = exact.f + exact.v * st.t
                exact.t = st.t
            sol_errs.append(reduce_norms(st.f - exact.f, "L2", st.grid))
    else:
        for st in finals[:-1]:
            fine = _restrict(finals[-1], st.grid)
            sol_errs.append(reduce_norms(st.f - fine.f, "L2", st.grid))
    scale = max(float(np.max(np.abs(finals[0].f))), 1e-30)
    if all(e <= 1e-12 * max(scale, 1.0) for e in sol_errs):
        echo("  solution errors at round-off; order table flagged exact")
        echo(f"  errors: {['%.3e' % e for e in sol_errs]}  [exact]")
    else:
        orders = [float(np.log2(a / b)) for a, b in zip(sol_errs, sol_errs[1:])]
        echo(f"  solution errors:   {['%.3e' % e for e in sol_errs]}")
        echo(f"  solution orders:   {['%.2f' % o for o in orders]}")
    res_orders = [float(np.log2(a / b)) for a, b in zip(residuals, residuals[1:])]
    echo(f"  divergence residuals: {['%.3e' % r for r in residuals]}")
    if res_orders:
        echo(f"  residual orders:      {['%.2f' % o for o in res_orders]}")
    return EXIT_OK


def _override(config: SimConfig, **kw):
    from dataclasses import replace
    return replace(config, **kw)


# ---------------------------------------------------------------------------
# Decay harness


DECAY_BANDS = {2: 0.10, 3: 0.15}


def run_decay(config: SimConfig | None, fit_only: str | None = None, echo=print) -> int:
    """Evolve (or read a series) and fit decay exponents over the window
    [t_final/4, t_final].

    The verdict is judged on the plain sup-norm of the first derivatives
    (the zero-order term of the sup-norm sum, free of the coordinate
    weights that amplify stencil error); the full weighted-sum fit is
    reported alongside.
    """
    if fit_only is not None:
        cols = snapshots.read_norms_csv(fit_only)
        ts, n1 = cols["t"], cols["N1"]
        lo = float(np.max(ts)) / 4.0
        sel = ts >= lo
        fit = diag.decay_fit(ts[sel], n1[sel])
        echo(f"decay fit (N1 column of {fit_only}, t in [{lo:.3g}, {np.max(ts):.3g}]):")
        echo(f"  exponent {fit.exponent:.4f} +- {fit.halfwidth:.4f} ({fit.n_samples} samples)")
        if config is not None:
            _decay_verdict(config, fit, echo)
        return EXIT_OK
    if config.t_final < 40.0:
        raise ValidationError("t_final", f"decay run needs t_final >= 40, got {config.t_final}")
    grid = config.grid()
    data = idata.realize(config.family(), grid)
    result = ev.evolve(config, data)
    if result.status != ev.STATUS_OK:
        echo(f"decay run terminated early: {result.status}")
        return EXIT_COERCIVITY_LOST if result.status == ev.STATUS_COERCIVITY_LOST else EXIT_ERROR
    recs = result.norms_records
    ts = np.array([r.t for r in recs])
    sel = ts >= config.t_final / 4.0
    fit_dinf = diag.decay_fit(ts[sel], np.array([r.dinf for r in recs])[sel])
    fit_n1 = diag.decay_fit(ts[sel], np.array([r.n1 for r in recs])[sel])
    echo(f"decay fits over t in [{config.t_final / 4:.3g}, {config.t_final:.3g}]:")
    echo(f"  sup|df|      exponent {fit_dinf.exponent:.4f} +- {fit_dinf.halfwidth:.4f}")
    echo(f"  N1 (weighted) exponent {fit_n1.exponent:.4f} +- {fit_n1.halfwidth:.4f}")
    return EXIT_OK if _decay_verdict(config, fit_dinf, echo) else EXIT_ERROR


def _decay_verdict(config: SimConfig, fit, echo) -> bool:
    target = -(config.n - 1) / 2.0
    band = DECAY_BANDS.get(config.n, 0.15)
    ok = target - band <= fit.exponent <= target + band
    echo(f"  target {target:+.2f}, band +-{band}: {'PASS' if ok else 'FAIL'}")
    return ok

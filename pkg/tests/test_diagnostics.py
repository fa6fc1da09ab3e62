import math

import numpy as np
import pytest

from tmsim import diagnostics as diag
from tmsim import evolution as ev
from tmsim import initial_data as idata
from tmsim.errors import DegenerateSeries, IncompleteSeries
from tmsim.grid import FieldState, GridSpec, pairwise_sum, reduce_norms
from tmsim.vectorfields import BundleComponent, SampledField, ZField, lorentz_fields

from conftest import smooth_state


def slow_norms(state, bundle):
    """Independent recomputation of the truncated norms: every product of
    at most two fields via the chain-rule field objects, norms via the
    tree reduction.  Exercises none of the compiled accumulation path."""
    g = state.grid
    fields = lorentz_fields(g.n)
    nZ = len(fields)
    comps = [BundleComponent(bundle, I) for I in range(g.q)]
    prods = [()] + [(b,) for b in range(nZ)] + \
            [(a, b) for a in range(nZ) for b in range(a, nZ)]
    m1 = m2 = n1 = n2 = 0.0
    for p in prods:
        vals, grads = [], []
        for comp in comps:
            obj = comp
            for idx in p:  # first entry applied first
                obj = ZField(fields[idx], obj)
            vals.append(obj.value())
            grads.append([obj.d1(mu) for mu in range(g.n + 1)])
        val_sq = sum(v * v for v in vals)
        grad_sq = sum(d * d for ds in grads for d in ds)
        l2v = math.sqrt(pairwise_sum(val_sq) * g.cell_volume)
        l2g = math.sqrt(pairwise_sum(grad_sq) * g.cell_volume)
        liv = math.sqrt(float(np.max(val_sq)))
        lig = math.sqrt(float(np.max(grad_sq)))
        m1 += l2g
        m2 += l2v
        if len(p) <= 1:
            n1 += lig
        n2 += liv
    return m1, m2, n1, n2


@pytest.mark.parametrize("n,q,N", [(2, 2, 16), (3, 1, 16)])
def test_norms_kernel_vs_slow_oracle(n, q, N):
    g = GridSpec(n=n, q=q, half_width=2.0, points_per_axis=N)
    state = smooth_state(g, 0.01, seed=5 * n + q)
    state.t = 0.63
    bundle = diag.build_bundle(state, need_third=True)
    rec = diag.compute_norms(state, bundle=bundle)
    m1, m2, n1, n2 = slow_norms(state, bundle)
    assert rec.m1 == pytest.approx(m1, rel=1e-10)
    assert rec.m2 == pytest.approx(m2, rel=1e-10)
    assert rec.n1 == pytest.approx(n1, rel=1e-10)
    assert rec.n2 == pytest.approx(n2, rel=1e-10)


def test_norms_zero_state():
    g = GridSpec(n=2, q=1, half_width=2.0, points_per_axis=16)
    rec = diag.compute_norms(FieldState.zeros(g))
    assert (rec.m1, rec.m2, rec.n1, rec.n2, rec.energy, rec.dinf) == (0, 0, 0, 0, 0, 0)


def test_norms_gaussian_alpha_zero_analytic():
    n = 2
    g = GridSpec(n=n, q=1, half_width=6.0, points_per_axis=256)
    st = idata.realize(idata.DataFamily(kind="gaussian_bump", amplitude=0.05, width=1.0), g)
    rec = diag.compute_norms(st)
    l2f = 0.05 * (np.pi / 2.0) ** (n / 4.0)
    l2df = 0.05 * math.sqrt(n) * (np.pi / 2.0) ** (n / 4.0)
    assert abs(rec.detail.l2_val[0] - l2f) <= 1e-6
    assert abs(rec.detail.l2_grad[0] - l2df) <= 1e-6
    # M2 dominates its alpha = 0 term (sums of nonnegative norms)
    assert rec.m2 >= l2f - 1e-6


def test_norm_monotonicity_in_truncation():
    g = GridSpec(n=2, q=2, half_width=2.0, points_per_axis=16)
    state = smooth_state(g, 0.01, seed=3)
    state.t = 0.4
    rec = diag.compute_norms(state)
    sums = [rec.detail.norm_sums(k) for k in (0, 1, 2)]
    for lower, upper in zip(sums, sums[1:]):
        assert all(a <= b + 1e-15 for a, b in zip(lower, upper))


def test_third_time_derivative_null_wave():
    g = GridSpec(n=2, q=1, half_width=10.0, points_per_axis=256)
    sigma = 0.8
    fam = idata.DataFamily(kind="null_wave", amplitude=0.05, width=sigma,
                           profile="gauss", axis=1)
    st = idata.realize(fam, g)
    b = diag.build_bundle(st, need_third=True)
    x = g.coord_grids()[0]
    s = -x / sigma
    exact = 0.05 * (12 * s - 8 * s ** 3) * np.exp(-s * s) / sigma ** 3
    err = np.max(np.abs(b.D3[b.pack3[0, 0, 0]][0] - exact))
    assert err < 5e-4  # stencil-error scale at this resolution


def test_energy_inequality_zero_run():
    samples = [diag.EnergySample(t, 0.0, 0.0, 0.0) for t in (0.0, 0.5, 1.0)]
    margins = diag.energy_and_inequality(samples)
    assert np.array_equal(margins, np.zeros(3))


def test_energy_inequality_gap_raises():
    samples = [diag.EnergySample(t, 1.0, 0.0, 0.0) for t in (0.0, 0.1, 0.2, 1.0)]
    with pytest.raises(IncompleteSeries):
        diag.energy_and_inequality(samples)


def test_energy_inequality_small_data_run():
    g = GridSpec(n=2, q=1, half_width=8.0, points_per_axis=64)
    data = idata.realize(idata.DataFamily(kind="gaussian_bump", amplitude=5e-3, width=1.2), g)

    class Cfg:
        cfl, t_final, diag_cadence, snapshot_cadence, workers = 0.2, 0.5, 2, 0, 1

    result = ev.evolve(Cfg(), data)
    assert result.status == ev.STATUS_OK
    margins = diag.energy_and_inequality(result.energy_series)
    assert np.all(margins >= 0.0)
    # the two-sided estimate reduces to |df|(t) <= 2 |df|(0) e^(...) here
    assert margins[0] == pytest.approx(result.energy_series[0].grad_l2, rel=1e-12)


def _const_field(g, value, dt=0.0):
    return SampledField(g, 0.7, value * np.ones(g.shape),
                        dt=np.full(g.shape, dt),
                        dtt=np.zeros(g.shape), dttt=np.zeros(g.shape),
                        periodic=False)


def test_null_form_coordinate_examples():
    g = GridSpec(n=2, q=1, half_width=2.0, points_per_axis=32)
    X = g.coord_grids()
    t_field = SampledField(g, 0.7, np.full(g.shape, 0.7), dt=np.ones(g.shape),
                           dtt=np.zeros(g.shape), periodic=False)
    x1_field = SampledField(g, 0.7, X[0], dt=np.zeros(g.shape),
                            dtt=np.zeros(g.shape), periodic=False)
    mask = t_field.interior_mask()
    q00 = diag.null_form(diag.NullFormId("q00"), t_field, t_field)
    assert np.allclose(q00[mask], -1.0, atol=1e-12)
    q01 = diag.null_form(diag.NullFormId("qab", 0, 1), t_field, x1_field)
    assert np.allclose(q01[mask], 1.0, atol=1e-12)


def test_null_form_antisymmetry_exact():
    g = GridSpec(n=2, q=1, half_width=float(np.pi), points_per_axis=32)
    from tmsim.vectorfields import battery_fields
    bf = battery_fields(g, 0.5)
    u, w = bf["plane_wave"], bf["cone"]
    qab = diag.null_form(diag.NullFormId("qab", 0, 1), u, w)
    qba = diag.null_form(diag.NullFormId("qab", 1, 0), u, w)
    qab_swap = diag.null_form(diag.NullFormId("qab", 0, 1), w, u)
    assert np.array_equal(qab, -qba)
    assert np.array_equal(qab, -qab_swap)


def test_null_estimate_ratio_zero_fields():
    g = GridSpec(n=2, q=1, half_width=2.0, points_per_axis=16)
    z = _const_field(g, 0.0)
    assert diag.null_estimate_ratio(diag.NullFormId("q00"), z, z) == 0.0


def test_null_estimate_ratio_stable_across_resolution():
    ratios = []
    for N in (64, 128):
        g = GridSpec(n=2, q=1, half_width=8.0, points_per_axis=N)
        data = idata.realize(idata.DataFamily(kind="gaussian_bump", amplitude=0.02, width=1.2), g)

        class Cfg:
            cfl, t_final, diag_cadence, snapshot_cadence, workers = 0.2, 2.0, 10 ** 9, 0, 1

        result = ev.evolve(Cfg(), data)
        bundle = diag.build_bundle(result.final_state, need_third=False)
        u = BundleComponent(bundle, 0)
        ratios.append(diag.null_estimate_ratio(diag.NullFormId("q00"), u, u))
    assert ratios[0] > 0
    assert 0.5 <= ratios[0] / ratios[1] <= 2.0


def test_det_expansion_orders(rng):
    for n, q in ((2, 2), (3, 3)):
        df = diag.generic_expansion_jet(rng, n, q)
        res = diag.det_expansion_check(df, (0.1, 0.05, 0.025))
        assert all(3.7 <= o <= 4.3 for o in res["orders"])


def test_det_expansion_exact_cases(rng):
    # single nonzero spatial entry: remainder identically zero
    df = np.zeros((3, 1))
    df[1, 0] = 0.7
    assert diag.det_expansion_remainder(df, 0.3) < 1e-15
    # null direction
    ell = np.array([1.0, -1.0, 0.0])[:, None]
    assert diag.det_expansion_remainder(ell, 0.4) < 1e-15
    # codimension one: rank-one determinant identity
    df = rng.uniform(-1, 1, size=(4, 1))
    assert diag.det_expansion_remainder(df, 0.3) < 1e-14


def test_decay_fit_synthetic_exact():
    ts = np.linspace(1.0, 30.0, 40)
    fit = diag.decay_fit(ts, (1.0 + ts) ** -1.0)
    assert fit.exponent == pytest.approx(-1.0, abs=1e-12)
    assert fit.halfwidth < 1e-10
    fit2 = diag.decay_fit(ts, 3.0 * (1.0 + ts) ** -0.5)
    assert fit2.exponent == pytest.approx(-0.5, abs=1e-12)


def test_decay_fit_degenerate():
    ts = np.linspace(1.0, 10.0, 10)
    vals = (1.0 + ts) ** -1.0
    vals[3] = 0.0
    with pytest.raises(DegenerateSeries):
        diag.decay_fit(ts, vals)


def test_decay_fit_confidence_covers_noise(rng):
    ts = np.linspace(1.0, 40.0, 60)
    noise = rng.normal(0, 0.01, ts.size)
    fit = diag.decay_fit(ts, (1.0 + ts) ** -1.0 * np.exp(noise))
    assert abs(fit.exponent + 1.0) < 3.0 * fit.halfwidth + 0.05
    assert fit.halfwidth > 0

import numpy as np
import pytest
import sympy as sp

from tmsim.diagnostics import NullFormId, null_basis, null_commutation_table
from tmsim.grid import GridSpec
from tmsim.vectorfields import (VectorField, apply_vector_field, battery_fields,
                                commutator_check, lorentz_fields,
                                structure_constants)


def _sympy_coords(n):
    return sp.symbols(f"t x1:{n + 1}", real=True)


def _sympy_apply(Z: VectorField, expr, coords):
    """Apply a generator to a sympy expression from its definition."""
    t = coords[0]
    if Z.kind == "translation":
        return sp.diff(expr, coords[Z.i])
    if Z.kind == "rotation":
        xa, xb = coords[Z.i], coords[Z.j]
        return xb * sp.diff(expr, xa) - xa * sp.diff(expr, xb)
    if Z.kind == "boost":
        xa = coords[Z.i]
        return t * sp.diff(expr, xa) + xa * sp.diff(expr, t)
    return sum(c * sp.diff(expr, c) for c in coords)  # scaling t d_t + r d_r


@pytest.mark.parametrize("n", [2, 3])
def test_structure_constants_vs_sympy(n):
    """[Z, d_nu] = sum_alpha a[nu, alpha] d_alpha, re-derived symbolically."""
    coords = _sympy_coords(n)
    psi = sp.Function("psi")(*coords)
    derivs = [sp.diff(psi, c) for c in coords]
    for Z in lorentz_fields(n):
        a = structure_constants(Z, n + 1)
        assert set(np.unique(a)) <= {-1.0, 0.0, 1.0}
        for nu in range(n + 1):
            comm = sp.expand(_sympy_apply(Z, derivs[nu], coords)
                             - sp.diff(_sympy_apply(Z, psi, coords), coords[nu]))
            expected = sp.expand(sum(a[nu, al] * derivs[al] for al in range(n + 1)))
            assert sp.simplify(comm - expected) == 0, (str(Z), nu)


@pytest.mark.parametrize("n", [2])
def test_box_commutator_vs_sympy(n):
    """[Z, box] = -2 box for the scaling and 0 otherwise."""
    coords = _sympy_coords(n)
    psi = sp.Function("psi")(*coords)

    def box(expr):
        out = -sp.diff(expr, coords[0], 2)
        for k in range(1, n + 1):
            out += sp.diff(expr, coords[k], 2)
        return out

    for Z in lorentz_fields(n):
        comm = sp.expand(_sympy_apply(Z, box(psi), coords) - box(_sympy_apply(Z, psi, coords)))
        expected = sp.expand(-2 * box(psi)) if Z.kind == "scaling" else sp.S.Zero
        assert sp.simplify(comm - expected) == 0, str(Z)


def _sympy_null_form(Q: NullFormId, u, w, coords):
    n = len(coords) - 1
    if Q.kind == "q00":
        out = -sp.diff(u, coords[0]) * sp.diff(w, coords[0])
        for k in range(1, n + 1):
            out += sp.diff(u, coords[k]) * sp.diff(w, coords[k])
        return out
    return (sp.diff(u, coords[Q.alpha]) * sp.diff(w, coords[Q.beta])
            - sp.diff(u, coords[Q.beta]) * sp.diff(w, coords[Q.alpha]))


@pytest.mark.parametrize("n", [2, 3])
def test_null_commutation_tables_vs_sympy(n):
    """Z Q(u,w) - Q(Zu,w) - Q(u,Zw) decomposed over the null-form basis,
    independently of the table generator."""
    coords = _sympy_coords(n)
    u = sp.Function("u")(*coords)
    w = sp.Function("w")(*coords)
    basis = null_basis(n)
    basis_exprs = [_sympy_null_form(B, u, w, coords) for B in basis]
    for Z in lorentz_fields(n):
        tables = null_commutation_table(Z, n)
        for Q in basis:
            key = ("q00",) if Q.kind == "q00" else ("qab", Q.alpha, Q.beta)
            table = tables[key]
            defect = sp.expand(
                _sympy_apply(Z, _sympy_null_form(Q, u, w, coords), coords)
                - _sympy_null_form(Q, _sympy_apply(Z, u, coords), w, coords)
                - _sympy_null_form(Q, u, _sympy_apply(Z, w, coords), coords))
            recon = sp.S.Zero
            for bkey, coeff in table.items():
                B = NullFormId("q00") if bkey[0] == "q00" else NullFormId("qab", bkey[1], bkey[2])
                idx = basis.index(B)
                recon += coeff * basis_exprs[idx]
            assert sp.simplify(defect - sp.expand(recon)) == 0, (str(Z), str(Q))
            for coeff in table.values():
                assert coeff in (-2.0, -1.0, 1.0, 2.0)


def test_apply_translation_on_coordinate():
    g = GridSpec(n=2, q=1, half_width=2.0, points_per_axis=32)
    fields = battery_fields(g, t=0.0)
    f = fields["txy"]  # value t*x1*x2 = 0 at t=0, but d_1 uses stencils on it
    Z = VectorField("translation", 1)
    out = apply_vector_field(Z, f)
    assert np.max(np.abs(out)) < 1e-12  # d_1 (t x1 x2) = t x2 = 0 at t = 0

    from tmsim.vectorfields import SampledField
    X = g.coord_grids()
    lin = SampledField(g, 0.0, X[0], dt=np.zeros(g.shape), periodic=False)
    out = apply_vector_field(Z, lin)
    mask = lin.interior_mask()
    assert np.max(np.abs(out - 1.0)[mask]) < 1e-12


def test_rotation_kills_radial():
    g = GridSpec(n=2, q=1, half_width=4.0, points_per_axis=128)
    from tmsim.vectorfields import SampledField
    r2 = np.zeros(g.shape)
    for x in g.coord_grids():
        r2 += x * x
    f = SampledField(g, 0.0, np.exp(-r2), dt=np.zeros(g.shape), periodic=False)
    out = apply_vector_field(VectorField("rotation", 1, 2), f)
    # stencil-error scale: dx^4/30 * max|f^(5)| * |x| ~ 4e-5 here
    assert np.max(np.abs(out)[f.interior_mask()]) < 1e-4


def test_scaling_on_cone_quadratic():
    g = GridSpec(n=2, q=1, half_width=2.0, points_per_axis=64)
    fields = battery_fields(g, t=0.7)
    cone = fields["cone"]
    out = apply_vector_field(VectorField("scaling"), cone)
    mask = cone.interior_mask()
    assert np.max(np.abs(out - 2.0 * cone.value())[mask]) < 1e-11


@pytest.mark.parametrize("n", [2, 3])
def test_commutator_check_battery(n):
    N = 64 if n == 2 else 32
    g = GridSpec(n=n, q=1, half_width=float(np.pi), points_per_axis=N)
    fields = battery_fields(g, t=0.7)
    for name, f in fields.items():
        tol = 60.0 * g.dx ** 4 if name == "plane_wave" else 1e-9
        for Z in lorentz_fields(n):
            assert commutator_check(Z, f)["max"] <= tol, (name, str(Z))


def test_field_count():
    assert len(lorentz_fields(2)) == 7
    assert len(lorentz_fields(3)) == 11


def test_rotation_requires_distinct_axes():
    with pytest.raises(ValueError):
        VectorField("rotation", 1, 1)

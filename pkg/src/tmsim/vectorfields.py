"""Lorentz vector fields and their discrete application.

Each generator is affine in the coordinates, Z = c^mu(t, x) d_mu with
c^mu = A^mu_lam x^lam + b^mu, so applying Z (or a product of two Z's) to a
grid function is a pointwise contraction of coordinate grids against the
function's derivative arrays.  Time derivatives always come from supplied
closures or the evolution equation, never from differencing snapshots;
spatial derivatives use the grid stencils.

Coefficient codes (shared with the compiled norms kernel):
    0 zero, +-1 constants, 2 the time coordinate, +-(10+k) the spatial
    coordinate x^{k+1}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridSpec, diff1, diff2

CODE_ZERO = 0
CODE_ONE = 1
CODE_MINUS_ONE = -1
CODE_TIME = 2


@dataclass(frozen=True)
class VectorField:
    """One generator: translation d_mu, rotation x^b d_a - x^a d_b,
    boost t d_a + x^a d_t, or the scaling t d_t + r d_r."""

    kind: str
    i: int = 0
    j: int = 0

    def __post_init__(self):
        if self.kind not in ("translation", "rotation", "boost", "scaling"):
            raise ValueError(f"unknown vector field kind {self.kind!r}")
        if self.kind == "rotation" and self.i == self.j:
            raise ValueError("rotation needs two distinct spatial axes")

    def __str__(self):
        if self.kind == "translation":
            return f"d_{self.i}"
        if self.kind == "rotation":
            return f"rot({self.i},{self.j})"
        if self.kind == "boost":
            return f"boost({self.i})"
        return "scaling"

    def coeff_codes(self, dim: int) -> np.ndarray:
        """Coefficient code per spacetime index mu."""
        codes = np.zeros(dim, dtype=np.int64)
        if self.kind == "translation":
            codes[self.i] = CODE_ONE
        elif self.kind == "rotation":
            a, b = self.i, self.j
            codes[a] = 10 + (b - 1)        # c^a = x^b
            codes[b] = -(10 + (a - 1))     # c^b = -x^a
        elif self.kind == "boost":
            a = self.i
            codes[a] = CODE_TIME           # c^a = t
            codes[0] = 10 + (a - 1)        # c^0 = x^a
        else:  # scaling
            codes[0] = CODE_TIME
            for k in range(1, dim):
                codes[k] = 10 + (k - 1)
        return codes

    def amatrix(self, dim: int) -> np.ndarray:
        """A[mu, lam] = d_lam c^mu (constant for affine coefficients)."""
        A = np.zeros((dim, dim))
        if self.kind == "rotation":
            a, b = self.i, self.j
            A[a, b] = 1.0
            A[b, a] = -1.0
        elif self.kind == "boost":
            a = self.i
            A[a, 0] = 1.0
            A[0, a] = 1.0
        elif self.kind == "scaling":
            for mu in range(dim):
                A[mu, mu] = 1.0
        return A


def lorentz_fields(n: int) -> list:
    """Canonical ordering: translations, rotations (a<b), boosts, scaling."""
    fields = [VectorField("translation", mu) for mu in range(n + 1)]
    fields += [VectorField("rotation", a, b)
               for a in range(1, n + 1) for b in range(a + 1, n + 1)]
    fields += [VectorField("boost", a) for a in range(1, n + 1)]
    fields.append(VectorField("scaling"))
    return fields


def structure_constants(Z: VectorField, dim: int) -> np.ndarray:
    """Constants a[nu, alpha] in [Z, d_nu] = sum_alpha a[nu, alpha] d_alpha;
    all entries lie in {0, +-1} for the Lorentz fields and the scaling."""
    return -Z.amatrix(dim).T


def coefficient_grids(Z: VectorField, t: float, coords: list) -> list:
    """Realized coefficient values c^mu on the grid (scalars where
    constant); entries are floats or full arrays."""
    dim = len(coords) + 1
    codes = Z.coeff_codes(dim)
    out = []
    for mu in range(dim):
        code = int(codes[mu])
        if code == CODE_ZERO:
            out.append(0.0)
        elif code == CODE_ONE:
            out.append(1.0)
        elif code == CODE_MINUS_ONE:
            out.append(-1.0)
        elif code == CODE_TIME:
            out.append(float(t))
        elif code >= 10:
            out.append(coords[code - 10])
        else:
            out.append(-coords[-code - 10])
    return out


# ---------------------------------------------------------------------------
# Differentiable-field protocol.  A field object exposes value() and
# d1/d2/d3(mu...) grid arrays plus its grid, time, and an interior mask for
# non-periodic test functions (stencil wrap pollutes a rim of cells).


class SampledField:
    """Grid samples with analytically supplied time derivatives; spatial
    and mixed derivatives come from the 4th-order stencils on demand."""

    def __init__(self, grid: GridSpec, t: float, value, dt=None, dtt=None,
                 dttt=None, periodic: bool = True):
        self.grid = grid
        self.t = t
        self._value = np.asarray(value, dtype=float)
        self._dt = None if dt is None else np.asarray(dt, dtype=float)
        self._dtt = None if dtt is None else np.asarray(dtt, dtype=float)
        self._dttt = None if dttt is None else np.asarray(dttt, dtype=float)
        self.periodic = periodic
        self._cache = {}

    def value(self):
        return self._value

    def _need(self, name, arr):
        if arr is None:
            raise ValueError(f"field has no supplied {name}")
        return arr

    def _spatial(self, base: np.ndarray, axes: tuple) -> np.ndarray:
        key = (id(base), axes)
        if key not in self._cache:
            out = base
            counts = {}
            for ax in axes:
                counts[ax] = counts.get(ax, 0) + 1
            arr = base
            for ax, cnt in sorted(counts.items()):
                while cnt >= 2:
                    arr = diff2(arr, ax, self.grid.dx)
                    cnt -= 2
                if cnt == 1:
                    arr = diff1(arr, ax, self.grid.dx)
            self._cache[key] = arr
        return self._cache[key]

    def _derivative(self, mus: tuple) -> np.ndarray:
        n_time = sum(1 for m in mus if m == 0)
        spatial = tuple(sorted(m - 1 for m in mus if m != 0))
        if n_time == 0:
            base = self._value
        elif n_time == 1:
            base = self._need("d/dt", self._dt)
        elif n_time == 2:
            base = self._need("d2/dt2", self._dtt)
        elif n_time == 3:
            base = self._need("d3/dt3", self._dttt)
        else:
            raise ValueError("derivatives beyond third order are not supplied")
        return self._spatial(base, spatial) if spatial else base

    def d1(self, mu):
        return self._derivative((mu,))

    def d2(self, mu, nu):
        return self._derivative(tuple(sorted((mu, nu))))

    def d3(self, mu, nu, lam):
        return self._derivative(tuple(sorted((mu, nu, lam))))

    def interior_mask(self) -> np.ndarray:
        """True on cells whose widest stencil composition never wraps;
        everything for periodic fields."""
        if self.periodic:
            return np.ones(self.grid.shape, dtype=bool)
        margin = 6  # up to three composed 2-wide stencils
        N = self.grid.points_per_axis
        mask = np.ones(self.grid.shape, dtype=bool)
        for ax in range(self.grid.n):
            sl = [slice(None)] * self.grid.n
            sl[ax] = slice(0, margin)
            mask[tuple(sl)] = False
            sl[ax] = slice(N - margin, N)
            mask[tuple(sl)] = False
        return mask


class BundleComponent:
    """One field component of an evolved state, backed by a derivative
    bundle (see diagnostics.build_bundle)."""

    def __init__(self, bundle, index: int):
        self.bundle = bundle
        self.index = index
        self.grid = bundle.grid
        self.t = bundle.t
        self.periodic = True

    def value(self):
        return self.bundle.f[self.index]

    def d1(self, mu):
        return self.bundle.D1[mu, self.index]

    def d2(self, mu, nu):
        return self.bundle.D2[self.bundle.pack2[mu, nu], self.index]

    def d3(self, mu, nu, lam):
        if self.bundle.D3 is None:
            raise ValueError("bundle was built without third derivatives")
        return self.bundle.D3[self.bundle.pack3[mu, nu, lam], self.index]

    def interior_mask(self):
        return np.ones(self.grid.shape, dtype=bool)


class ZField:
    """Z applied to a field, itself differentiable one order lower."""

    def __init__(self, Z: VectorField, base):
        self.Z = Z
        self.base = base
        self.grid = base.grid
        self.t = base.t
        self.periodic = getattr(base, "periodic", True)
        self.dim = base.grid.n + 1
        self._coeffs = coefficient_grids(Z, base.t, base.grid.coord_grids())
        self._A = Z.amatrix(self.dim)

    def value(self):
        out = np.zeros(self.grid.shape)
        for mu in range(self.dim):
            c = self._coeffs[mu]
            if np.isscalar(c) and c == 0.0:
                continue
            out = out + c * self.base.d1(mu)
        return out

    def d1(self, lam):
        out = np.zeros(self.grid.shape)
        for mu in range(self.dim):
            a = self._A[mu, lam]
            if a != 0.0:
                out = out + a * self.base.d1(mu)
            c = self._coeffs[mu]
            if not (np.isscalar(c) and c == 0.0):
                out = out + c * self.base.d2(lam, mu)
        return out

    def d2(self, lam, nu):
        out = np.zeros(self.grid.shape)
        for mu in range(self.dim):
            a_nu = self._A[mu, nu]
            if a_nu != 0.0:
                out = out + a_nu * self.base.d2(lam, mu)
            a_lam = self._A[mu, lam]
            if a_lam != 0.0:
                out = out + a_lam * self.base.d2(nu, mu)
            c = self._coeffs[mu]
            if not (np.isscalar(c) and c == 0.0):
                out = out + c * self.base.d3(lam, nu, mu)
        return out

    def interior_mask(self):
        return self.base.interior_mask()


def apply_vector_field(Z: VectorField, field) -> np.ndarray:
    """Pointwise Zf on the grid."""
    return ZField(Z, field).value()


def box_operator(field) -> np.ndarray:
    """Flat wave operator eta^{mu nu} d_mu d_nu applied to a field."""
    n = field.grid.n
    out = -field.d2(0, 0)
    for k in range(1, n + 1):
        out = out + field.d2(k, k)
    return out


def box_time_derivative(field) -> np.ndarray:
    out = -field.d3(0, 0, 0)
    for k in range(1, field.grid.n + 1):
        out = out + field.d3(0, k, k)
    return out


def commutator_check(Z: VectorField, field) -> dict:
    """Measured deviations of the commutation relations on a test field.

    Checks [Z, box] against -2 box for the scaling and 0 otherwise, and
    every [Z, d_nu] against its structure constants (all in {0, +-1}).
    Returns max deviations over the field's interior mask.
    """
    grid = field.grid
    dim = grid.n + 1
    mask = field.interior_mask()
    coords = grid.coord_grids()

    boxf = box_operator(field)
    box_sampled = SampledField(grid, field.t, boxf, dt=box_time_derivative(field),
                               periodic=getattr(field, "periodic", True))
    z_box = apply_vector_field(Z, box_sampled)
    zf = ZField(Z, field)
    box_z = box_operator(zf)
    expected = -2.0 * boxf if Z.kind == "scaling" else 0.0
    box_dev = float(np.max(np.abs((z_box - box_z) - expected)[mask]))

    a = structure_constants(Z, dim)
    d_dev = 0.0
    for nu in range(dim):
        # [Z, d_nu] f = Z(d_nu f) - d_nu(Z f)
        dnu_f = SampledField(grid, field.t, field.d1(nu),
                             dt=field.d2(0, nu),
                             dtt=field.d3(0, 0, nu),
                             periodic=getattr(field, "periodic", True))
        lhs = apply_vector_field(Z, dnu_f) - zf.d1(nu)
        rhs = np.zeros(grid.shape)
        for alpha in range(dim):
            if a[nu, alpha] != 0.0:
                rhs = rhs + a[nu, alpha] * field.d1(alpha)
        d_dev = max(d_dev, float(np.max(np.abs(lhs - rhs)[mask])))
    return {"box": box_dev, "partials": d_dev,
            "max": max(box_dev, d_dev)}


# ---------------------------------------------------------------------------
# Analytic test battery (hand-written derivatives; the suite checks the
# discrete machinery against these, and the sympy oracle in the tests
# re-derives them independently).


def battery_fields(grid: GridSpec, t: float) -> dict:
    """Polynomial and trigonometric test functions with supplied time
    derivatives.  Polynomials are exact for the stencils but not periodic;
    the trigonometric entries are periodic when the box is a multiple of
    pi (callers choose the box)."""
    X = grid.coord_grids()
    n = grid.n
    r2 = np.zeros(grid.shape)
    for x in X:
        r2 += x * x
    out = {}
    out["cone"] = SampledField(       # t^2 - |x|^2
        grid, t, t * t - r2,
        dt=np.full(grid.shape, 2.0 * t),
        dtt=np.full(grid.shape, 2.0),
        dttt=np.zeros(grid.shape),
        periodic=False)
    out["txy"] = SampledField(        # t * x^1 * x^2
        grid, t, t * X[0] * X[1],
        dt=X[0] * X[1],
        dtt=np.zeros(grid.shape),
        dttt=np.zeros(grid.shape),
        periodic=False)
    phase = t - X[0]
    out["plane_wave"] = SampledField(  # sin(t - x^1)
        grid, t, np.sin(phase),
        dt=np.cos(phase),
        dtt=-np.sin(phase),
        dttt=-np.cos(phase),
        periodic=abs(grid.half_width % np.pi) < 1e-12)
    out["cubic"] = SampledField(      # (x^1)^3 - 3 t^2 x^1
        grid, t, X[0] ** 3 - 3.0 * t * t * X[0],
        dt=-6.0 * t * X[0],
        dtt=-6.0 * X[0],
        dttt=np.zeros(grid.shape),
        periodic=False)
    return out

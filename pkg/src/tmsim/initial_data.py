"""Construction of the small-data families and exact-solution states.

All built-in families are compactly supported (Gaussian tails are cut at
12 sigma, which counts as the support radius), so the causal-diamond box
sizing in the config layer is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IncompatibleWithPeriodicity, UnresolvableProfile
from .grid import FieldState, GridSpec

GAUSSIAN_CUTOFF_SIGMAS = 12.0

KIND_GAUSSIAN = "gaussian_bump"
KIND_PLANE_PLUS_BUMP = "plane_plus_bump"
KIND_NULL_WAVE = "null_wave"
KIND_LINEAR_PLANE = "linear_plane"
KIND_CUSTOM = "custom"

KINDS = (KIND_GAUSSIAN, KIND_PLANE_PLUS_BUMP, KIND_NULL_WAVE, KIND_LINEAR_PLANE, KIND_CUSTOM)


@dataclass
class DataFamily:
    """Parameters of one initial-data family.

    amplitude is the overall small parameter (<= 1); width scales the
    profile; polarization picks the direction in the q target components.
    For null waves, axis selects the propagation direction x^axis and
    profile names the 1D shape (only "bump" is built in).  For planes,
    rate is the time slope (spatially varying planes cannot be periodized
    and are rejected).
    """

    kind: str
    amplitude: float = 0.05
    width: float = 1.0
    center: tuple = ()
    polarization: tuple = ()
    axis: int = 1
    profile: str = "bump"
    rate: float = 0.0
    offset: float = 0.0
    gradient: tuple = ()
    custom_fn: object = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown data kind {self.kind!r}")
        if not (0.0 <= self.amplitude <= 1.0):
            raise ValueError(f"amplitude must lie in [0, 1], got {self.amplitude}")
        if self.width <= 0:
            raise ValueError(f"width must be positive, got {self.width}")

    def support_radius(self) -> float | None:
        """Radius beyond which the realized data vanish identically
        (None for spatially uniform families, which cannot wrap)."""
        if self.kind in (KIND_GAUSSIAN, KIND_PLANE_PLUS_BUMP):
            r = GAUSSIAN_CUTOFF_SIGMAS * self.width
        elif self.kind == KIND_NULL_WAVE:
            r = NULL_PROFILES[self.profile][1] * self.width
        elif self.kind == KIND_LINEAR_PLANE:
            return None
        else:
            return None
        if self.center:
            r += max(abs(c) for c in self.center)
        return r


def bump_profile(s):
    """Compactly supported smooth bump and its derivative.

    phi(s) = exp(1 - 1/(1 - s^2)) on |s| < 1, zero outside; phi(0) = 1.
    """
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1.0
    phi = np.zeros_like(s)
    dphi = np.zeros_like(s)
    w = 1.0 - s[inside] * s[inside]
    val = np.exp(1.0 - 1.0 / w)
    phi[inside] = val
    dphi[inside] = val * (-2.0 * s[inside] / (w * w))
    if phi.ndim == 0:
        return float(phi), float(dphi)
    return phi, dphi


def gauss_profile(s):
    """Gaussian cut at 12 widths: compact support with a jump below
    double-precision resolution, so stencils see an analytic profile.

    The true bump's edge layer keeps desk-scale grids out of the
    asymptotic 4th-order regime; convergence studies use this profile.
    """
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < GAUSSIAN_CUTOFF_SIGMAS
    phi = np.zeros_like(s)
    dphi = np.zeros_like(s)
    val = np.exp(-s[inside] * s[inside])
    phi[inside] = val
    dphi[inside] = -2.0 * s[inside] * val
    if phi.ndim == 0:
        return float(phi), float(dphi)
    return phi, dphi


NULL_PROFILES = {"bump": (bump_profile, 1.0),
                 "gauss": (gauss_profile, GAUSSIAN_CUTOFF_SIGMAS)}


def _resolve_polarization(family: DataFamily, q: int) -> np.ndarray:
    pol = np.array(family.polarization if family.polarization else [1.0] + [0.0] * (q - 1), dtype=float)
    if pol.shape != (q,):
        raise ValueError(f"polarization must have {q} components, got {pol.shape}")
    norm = np.sqrt(np.sum(pol * pol))
    if norm == 0:
        raise ValueError("polarization must be a nonzero vector")
    return pol / norm


def realize(family: DataFamily, grid: GridSpec) -> FieldState:
    """Sample a data family on the grid at t = 0."""
    q = grid.q
    shape = (q,) + grid.shape
    f = np.zeros(shape)
    v = np.zeros(shape)
    eps = family.amplitude

    if family.kind == KIND_CUSTOM:
        if family.custom_fn is None:
            raise ValueError("custom family needs custom_fn(grid) -> (f, v)")
        f, v = family.custom_fn(grid)
        state = FieldState(grid, 0.0, np.asarray(f, dtype=float), np.asarray(v, dtype=float))
        state.require_finite()
        return state

    if family.kind in (KIND_GAUSSIAN, KIND_PLANE_PLUS_BUMP):
        sigma = family.width
        if sigma <= 2.0 * grid.dx:
            raise UnresolvableProfile(
                f"width {sigma} <= 2 dx = {2.0 * grid.dx}; refine the grid or widen the profile")
        pol = _resolve_polarization(family, q)
        center = np.array(family.center if family.center else [0.0] * grid.n, dtype=float)
        if center.shape != (grid.n,):
            raise ValueError(f"center must have {grid.n} components")
        r2 = np.zeros(grid.shape)
        for k, x in enumerate(grid.coord_grids()):
            r2 += (x - center[k]) ** 2
        prof = np.exp(-r2 / (sigma * sigma))
        prof[r2 > (GAUSSIAN_CUTOFF_SIGMAS * sigma) ** 2] = 0.0
        for I in range(q):
            f[I] = eps * pol[I] * prof
        if family.kind == KIND_PLANE_PLUS_BUMP:
            for I in range(q):
                v[I] += family.rate * pol[I]
                f[I] += family.offset * pol[I]
        return FieldState(grid, 0.0, f, v)

    if family.kind == KIND_NULL_WAVE:
        if family.profile not in NULL_PROFILES:
            raise ValueError(f"unknown null-wave profile {family.profile!r}")
        sigma = family.width
        if sigma <= 2.0 * grid.dx:
            raise UnresolvableProfile(
                f"width {sigma} <= 2 dx = {2.0 * grid.dx}")
        if not (1 <= family.axis <= grid.n):
            raise ValueError(f"axis must be in 1..{grid.n}")
        pol = _resolve_polarization(family, q)
        x = grid.coord_grids()[family.axis - 1]
        # state of the traveling solution profile(t - x) at t = 0
        phi, dphi = NULL_PROFILES[family.profile][0](-x / sigma)
        for I in range(q):
            f[I] = eps * pol[I] * phi
            v[I] = eps * pol[I] * dphi / sigma
        return FieldState(grid, 0.0, f, v)

    if family.kind == KIND_LINEAR_PLANE:
        # only planes with zero spatial gradient are periodic
        if any(abs(g) > 0 for g in family.gradient):
            raise IncompatibleWithPeriodicity(
                "a plane with nonzero spatial slope cannot live on a periodic box")
        pol = _resolve_polarization(family, q)
        for I in range(q):
            f[I] = family.offset * pol[I]
            v[I] = family.rate * pol[I]
        return FieldState(grid, 0.0, f, v)

    raise ValueError(f"unhandled kind {family.kind!r}")


def null_wave_exact(family: DataFamily, grid: GridSpec, t: float) -> FieldState:
    """The traveling-wave solution profile(t - x^axis) wrapped onto the
    periodic box; agrees with realize(...) at t = 0."""
    if family.kind != KIND_NULL_WAVE:
        raise ValueError("null_wave_exact needs a null_wave family")
    q = grid.q
    pol = _resolve_polarization(family, q)
    sigma = family.width
    x = grid.coord_grids()[family.axis - 1]
    period = 2.0 * grid.half_width
    s = t - x
    # wrap the argument into the box so late times stay comparable
    s = (s + grid.half_width) % period - grid.half_width
    phi, dphi = NULL_PROFILES[family.profile][0](s / sigma)
    shape = (q,) + grid.shape
    f = np.zeros(shape)
    v = np.zeros(shape)
    for I in range(q):
        f[I] = family.amplitude * pol[I] * phi
        v[I] = family.amplitude * pol[I] * dphi / sigma
    return FieldState(grid, t, f, v)

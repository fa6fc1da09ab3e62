"""Periodic spatial grid, discrete field state, and finite-difference stencils.

All spatial derivatives in the package are 4th-order central differences on
a uniform periodic box [-L, L)^n.  Norm reductions use a fixed pairwise
tree so results are bit-reproducible regardless of call pattern or worker
count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonFinite


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic box [-L, L)^n with N points per axis.

    The resolution invariants (N >= 16 and even) are structural; the
    no-wrap sizing rule couples grid, data support and final time and is
    enforced at config level where all three are known.
    """

    n: int
    q: int
    half_width: float
    points_per_axis: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"spatial dimension must be >= 1, got {self.n}")
        if self.q < 1:
            raise ValueError(f"codimension must be >= 1, got {self.q}")
        if self.half_width <= 0:
            raise ValueError(f"half_width must be positive, got {self.half_width}")
        N = self.points_per_axis
        if N < 16 or N % 2 != 0:
            raise ValueError(f"points_per_axis must be even and >= 16, got {N}")

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / self.points_per_axis

    @property
    def shape(self) -> tuple:
        return (self.points_per_axis,) * self.n

    @property
    def num_cells(self) -> int:
        return self.points_per_axis ** self.n

    @property
    def cell_volume(self) -> float:
        return self.dx ** self.n

    def axis_coords(self) -> np.ndarray:
        """1D coordinate values along one axis (identical for all axes)."""
        N = self.points_per_axis
        return -self.half_width + self.dx * np.arange(N)

    def coord_grids(self) -> list:
        """Full-shape coordinate arrays x^1 .. x^n (C order)."""
        ax = self.axis_coords()
        out = []
        for k in range(self.n):
            shape = [1] * self.n
            shape[k] = self.points_per_axis
            out.append(np.broadcast_to(ax.reshape(shape), self.shape).copy())
        return out

    def radius_grid(self) -> np.ndarray:
        r2 = np.zeros(self.shape)
        for x in self.coord_grids():
            r2 += x * x
        return np.sqrt(r2)


@dataclass
class FieldState:
    """The evolved unknowns: q graph components and their time derivative,
    sampled on the grid at one time."""

    grid: GridSpec
    t: float
    f: np.ndarray  # (q, N, ..., N)
    v: np.ndarray  # (q, N, ..., N), v = d/dt f

    def __post_init__(self):
        expect = (self.grid.q,) + self.grid.shape
        if self.f.shape != expect or self.v.shape != expect:
            raise ValueError(
                f"field arrays must have shape {expect}, got {self.f.shape} / {self.v.shape}"
            )

    def require_finite(self):
        if not np.isfinite(self.f).all() or not np.isfinite(self.v).all():
            raise NonFinite(f"non-finite sample in state at t={self.t}")

    def copy(self) -> "FieldState":
        return FieldState(self.grid, self.t, self.f.copy(), self.v.copy())

    @classmethod
    def zeros(cls, grid: GridSpec, t: float = 0.0) -> "FieldState":
        shape = (grid.q,) + grid.shape
        return cls(grid, t, np.zeros(shape), np.zeros(shape))


# ---------------------------------------------------------------------------
# Stencils (array level).  `axis` counts spatial axes 0..n-1 of the array's
# trailing dimensions; pass arrays whose last n axes are the grid.


def diff1(u: np.ndarray, axis: int, dx: float) -> np.ndarray:
    """4th-order first derivative along a periodic axis.

    Grouped as 8(u_{+1} - u_{-1}) - (u_{+2} - u_{-2}) so constants (and
    periodic shifts of a constant) differentiate to exactly zero.
    """
    ax = axis - u.ndim if axis >= 0 else axis  # address from the end
    out = 8.0 * (np.roll(u, -1, axis=ax) - np.roll(u, 1, axis=ax))
    out -= np.roll(u, -2, axis=ax) - np.roll(u, 2, axis=ax)
    out /= 12.0 * dx
    return out


def diff2(u: np.ndarray, axis: int, dx: float) -> np.ndarray:
    """4th-order second derivative along one periodic axis, grouped as
    16(u_{+1} + u_{-1}) - (u_{+2} + u_{-2}) - 30 u."""
    ax = axis - u.ndim if axis >= 0 else axis
    out = 16.0 * (np.roll(u, -1, axis=ax) + np.roll(u, 1, axis=ax))
    out -= np.roll(u, -2, axis=ax) + np.roll(u, 2, axis=ax)
    out -= 30.0 * u
    out /= 12.0 * dx * dx
    return out


def diff_mixed(u: np.ndarray, axis_a: int, axis_b: int, dx: float) -> np.ndarray:
    """Mixed second derivative on two distinct axes (composed stencils)."""
    if axis_a == axis_b:
        raise ValueError("mixed derivative needs distinct axes")
    return diff1(diff1(u, axis_a, dx), axis_b, dx)


def spatial_derivative(state: FieldState, field_index: int, axis: int, order: int) -> np.ndarray:
    """Derivative of one field component along one spatial axis (1-based
    axis numbering matching coordinates x^1..x^n)."""
    if not (1 <= axis <= state.grid.n):
        raise ValueError(f"axis must be in 1..{state.grid.n}, got {axis}")
    u = state.f[field_index]
    if order == 1:
        return diff1(u, axis - 1, state.grid.dx)
    if order == 2:
        return diff2(u, axis - 1, state.grid.dx)
    raise ValueError(f"order must be 1 or 2, got {order}")


def jet_grid(state: FieldState) -> np.ndarray:
    """First-derivative array d_mu f^I of shape (n+1, q, grid): time row
    is v, spatial rows are stencil derivatives."""
    g = state.grid
    df = np.empty((g.n + 1, g.q) + g.shape)
    df[0] = state.v
    for k in range(g.n):
        for I in range(g.q):
            df[k + 1, I] = diff1(state.f[I], k, g.dx)
    return df


def first_jet_at(state: FieldState, cell: tuple):
    """FirstJet at one cell: time derivative from v, spatial derivatives by
    the periodic 4th-order stencil evaluated at that cell only."""
    from .geometry import FirstJet  # local import to avoid a cycle

    g = state.grid
    N = g.points_per_axis
    if len(cell) != g.n:
        raise ValueError(f"cell index must have {g.n} components")
    cell = tuple(int(c) % N for c in cell)
    df = np.empty((g.n + 1, g.q))
    df[0] = state.v[(slice(None),) + cell]
    for k in range(g.n):
        def sample(off, I):
            idx = list(cell)
            idx[k] = (cell[k] + off) % N
            return state.f[(I,) + tuple(idx)]
        for I in range(g.q):
            acc = 8.0 * (sample(1, I) - sample(-1, I))
            acc -= sample(2, I) - sample(-2, I)
            df[k + 1, I] = acc / (12.0 * g.dx)
    return FirstJet(n=g.n, q=g.q, df=df)


# ---------------------------------------------------------------------------
# Reductions


def pairwise_sum(values: np.ndarray) -> float:
    """Sum by a fixed binary tree over the flattened (C-order) array.

    The reduction order depends only on the array length, never on worker
    count or chunking, so repeated calls give identical bits.
    """
    flat = np.ravel(values, order="C").astype(np.float64, copy=True)
    n = flat.size
    if n == 0:
        return 0.0
    while n > 1:
        half = n // 2
        flat[:half] = flat[:half] + flat[half : 2 * half]
        if n % 2 == 1:
            # odd tail rides along at the end of the active prefix
            flat[half] = flat[2 * half]
            n = half + 1
        else:
            n = half
    return float(flat[0])


def reduce_norms(u: np.ndarray, kind: str, grid: GridSpec, weight: np.ndarray | None = None) -> float:
    """Discrete norms of a grid function: L2 = sqrt(sum u^2 dx^n),
    Linf = max |u|, L1_weighted = sum |u| w dx^n."""
    if kind == "L2":
        return float(np.sqrt(pairwise_sum(u * u) * grid.cell_volume))
    if kind == "Linf":
        return float(np.max(np.abs(u))) if u.size else 0.0
    if kind == "L1_weighted":
        if weight is None:
            raise ValueError("L1_weighted needs a weight array")
        return float(pairwise_sum(np.abs(u) * weight) * grid.cell_volume)
    raise ValueError(f"unknown norm kind {kind!r}")

import numpy as np
import pytest

from tmsim.grid import FieldState, GridSpec


def smooth_state(grid: GridSpec, amp: float, seed: int, nmodes: int = 3) -> FieldState:
    """Random smooth periodic state from a few low Fourier modes (rough
    random samples have huge discrete derivatives and break coercivity)."""
    rng = np.random.default_rng(seed)
    X = grid.coord_grids()
    L = grid.half_width
    f = np.zeros((grid.q,) + grid.shape)
    v = np.zeros_like(f)
    for I in range(grid.q):
        for _ in range(nmodes):
            kvec = rng.integers(-2, 3, size=grid.n)
            ph = rng.uniform(0, 2 * np.pi, size=2)
            arg = sum(np.pi * kvec[k] * X[k] / L for k in range(grid.n))
            f[I] += amp * rng.uniform(0.3, 1.0) * np.sin(arg + ph[0])
            v[I] += amp * rng.uniform(0.3, 1.0) * np.sin(arg + ph[1])
    return FieldState(grid, 0.0, f, v)


def leibniz_det(m: np.ndarray) -> float:
    """Determinant straight from the permutation formula (independent of
    both the closed-form cofactors and LAPACK)."""
    from itertools import permutations

    dim = m.shape[0]
    total = 0.0
    for perm in permutations(range(dim)):
        sign = 1
        seen = list(perm)
        for i in range(dim):
            while seen[i] != i:
                j = seen[i]
                seen[i], seen[j] = seen[j], seen[i]
                sign = -sign
        term = sign
        for i in range(dim):
            term *= m[i, perm[i]]
        total += term
    return total


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)

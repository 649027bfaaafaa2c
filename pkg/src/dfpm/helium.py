"""Matrix-free s-limit Helium Hamiltonian on a symmetric triangular grid.

The two radial coordinates share one uniform mesh ``r_i = i h`` (i = 1..n)
with zero Dirichlet values at ``r = 0`` and ``r = R``.  Because the ground
state is symmetric, ``u(r1, r2) = u(r2, r1)``, only the lower triangle
``i >= j`` is stored.  Off-diagonal nodes stand for two points of the full
square, hence weight ``2 h^2``; diagonal nodes carry ``h^2``.  With those
weights the triangle inner product is the 2D trapezoid rule of the full
square and the Hamiltonian is self-adjoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .eigen import LinearOperator, _rayleigh_force, _require_normalized, renormalize
from .errors import DomainError

DEFAULT_R = 15.0
DEFAULT_MASS = 1.0
DEFAULT_DAMPING = 1.54

# k -> (N, dt, E0) as tabulated for the benchmark
REFERENCE_TABLE = {
    4: (23871, 0.066, -2.863893321606),
    6: (34980, 0.055, -2.868655504822),
    8: (51360, 0.045, -2.871926990227),
    10: (75466, 0.037, -2.874170330715),
    12: (110215, 0.031, -2.875706726414),
    14: (161596, 0.026, -2.876758055924),
    16: (237016, 0.021, -2.877477040659),
    18: (346528, 0.017, -2.877968543434),
    20: (508536, 0.014, -2.878304445684),
    22: (744810, 0.011, -2.878533964475),
    24: (1090026, 0.009, -2.878690772322),
}
REFERENCE_E_INF = -2.8790287673


def mesh_size(k: int) -> float:
    return 0.1 / 1.1 ** k


@dataclass
class HeliumGrid:
    h: float
    R: float = DEFAULT_R
    k: int = None
    n: int = field(init=False)
    r: np.ndarray = field(init=False, repr=False)
    rows: np.ndarray = field(init=False, repr=False)
    cols: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not (self.h > 0 and self.R > 0):
            raise DomainError("h and R must be positive")
        # small guard so R/h landing on an integer is not lost to rounding
        self.n = math.floor(self.R / self.h + 1e-9) - 1
        if self.n < 2:
            raise DomainError(f"grid too coarse: n = {self.n} interior points")
        self.r = self.h * np.arange(1, self.n + 1)
        self.rows, self.cols = np.tril_indices(self.n)
        self.weights = np.where(self.rows == self.cols, 1.0, 2.0) * self.h ** 2

    @property
    def N(self) -> int:
        return self.n * (self.n + 1) // 2

    @property
    def r1(self) -> np.ndarray:
        return self.r[self.rows]

    @property
    def r2(self) -> np.ndarray:
        return self.r[self.cols]

    def index(self, i: int, j: int) -> int:
        """Linear index of node ``(i, j)`` (1-based, either order)."""
        if i < j:
            i, j = j, i
        if not (1 <= j <= i <= self.n):
            raise DomainError(f"node ({i}, {j}) outside the interior")
        return (i - 1) * i // 2 + (j - 1)

    def node(self, idx: int):
        return int(self.rows[idx]) + 1, int(self.cols[idx]) + 1

    def to_square(self, u: np.ndarray) -> np.ndarray:
        """Symmetric ``n x n`` array from packed storage."""
        U = np.zeros((self.n, self.n))
        U[self.rows, self.cols] = u
        U[self.cols, self.rows] = u
        return U

    def from_square(self, U: np.ndarray) -> np.ndarray:
        return U[self.rows, self.cols]

    def inner(self, a, b) -> float:
        return grid_inner_product(self, a, b)


def build_grid(k: int, R: float = DEFAULT_R) -> HeliumGrid:
    if k < 0:
        raise DomainError("k must be non-negative")
    return HeliumGrid(mesh_size(k), R, k)


def grid_inner_product(grid: HeliumGrid, a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != (grid.N,) or b.shape != (grid.N,):
        raise DomainError(f"vectors must have length N = {grid.N}")
    return float(np.dot(grid.weights * a, b))


class HeliumOperator(LinearOperator):
    """``H u``: five-point kinetic stencil plus ``-2/r1 - 2/r2 + 1/max(r1, r2)``."""

    def __init__(self, grid: HeliumGrid):
        self.grid = grid
        r = grid.r
        R1, R2 = np.meshgrid(r, r, indexing="ij")
        self._potential = -2.0 / R1 - 2.0 / R2 + 1.0 / np.maximum(R1, R2)
        self._inv_h2 = 1.0 / grid.h ** 2
        super().__init__(self._apply, grid.N, grid.weights)

    def _apply(self, u: np.ndarray) -> np.ndarray:
        g = self.grid
        if u.shape != (g.N,):
            raise DomainError(f"expected a vector of length {g.N}, got shape {u.shape}")
        P = np.zeros((g.n + 2, g.n + 2))
        P[g.rows + 1, g.cols + 1] = u
        P[g.cols + 1, g.rows + 1] = u
        U = P[1:-1, 1:-1]
        lap = P[:-2, 1:-1] + P[2:, 1:-1] + P[1:-1, :-2] + P[1:-1, 2:] - 4.0 * U
        HU = -0.5 * self._inv_h2 * lap + self._potential * U
        return HU[g.rows, g.cols]

    def diagonal(self) -> np.ndarray:
        g = self.grid
        return 2.0 * self._inv_h2 + self._potential[g.rows, g.cols]

    def gershgorin_bounds(self):
        """Interval containing the spectrum (the stencil's off-diagonals are -1/(2h^2))."""
        off = 4 * 0.5 * self._inv_h2
        d = self.diagonal()
        return float(np.min(d) - off), float(np.max(d) + off)


def apply_hamiltonian(op: HeliumOperator, u) -> np.ndarray:
    return op(np.asarray(u, dtype=float))


def helium_force(op: HeliumOperator, u) -> np.ndarray:
    """``<u|H|u> u - H u`` for a normalized ``u``."""
    u = np.asarray(u, dtype=float)
    _require_normalized(op, u)
    return _rayleigh_force(op, u, 1.0)


def _dt_fit_constant() -> float:
    ks = np.array(sorted(REFERENCE_TABLE))
    h = np.array([mesh_size(k) for k in ks])
    dt = np.array([REFERENCE_TABLE[k][1] for k in ks])
    return float(np.dot(h, dt) / np.dot(h, h))


def default_dt(k: int) -> float:
    """Tabulated step for even ``4 <= k <= 24``; otherwise ``c * h`` with ``c``
    fitted to the table by least squares."""
    if k in REFERENCE_TABLE:
        return REFERENCE_TABLE[k][1]
    return _dt_fit_constant() * mesh_size(k)


def initial_guess(grid: HeliumGrid) -> np.ndarray:
    """Positive, symmetric ``r1 r2 exp(-(r1 + r2))``, normalized."""
    r1, r2 = grid.r1, grid.r2
    return renormalize(r1 * r2 * np.exp(-(r1 + r2)), grid.weights)


def estimate_helium_dt(op: HeliumOperator, coarse_h: float = 0.25,
                       coarse_tol: float = 1e-4) -> float:
    """Step-size bound ``2 / (sqrt(E1-E0) + sqrt(Emax-E0))`` from cheap estimates.

    ``E0`` and ``E1`` barely depend on the mesh, so they come from a loose
    two-state solve on a coarse grid of the same box.  ``Emax`` is the
    Gershgorin upper bound of the fine operator, which errs on the safe
    (smaller step) side.
    """
    from .dynamics import IntegratorConfig
    from .eigen import estimate_dt_max, solve_lowest

    grid = HeliumGrid(max(coarse_h, op.grid.h), op.grid.R)
    coarse = HeliumOperator(grid)
    _, cmax = coarse.gershgorin_bounds()
    cdt = 0.9 * 2.0 / math.sqrt(cmax + 3.0)
    cfg = IntegratorConfig(dt=cdt, damping=DEFAULT_DAMPING, residual_tol=coarse_tol,
                           velocity_tol=coarse_tol, max_steps=50_000)
    e0, e1 = solve_lowest(coarse, 2, cfg, start=initial_guess(grid), record=False)
    _, Emax = op.gershgorin_bounds()
    return estimate_dt_max(e0.eigenvalue, e1.eigenvalue, Emax)

"""Symmetric eigenvalue problems solved by damped dynamics on the unit sphere.

The force ``F(u) = -A u + <u, A u> u`` is minus the sphere gradient of
``V(u) = <u, A u> / 2``.  Its stationary points on ``<u, u> = 1`` are the
eigenvectors of ``A``; the damped motion settles in the minimum,
i.e. the lowest eigenpair.  Flipping the sign of ``F`` finds the largest.
Higher pairs come from Gram-Schmidt deflation against converged vectors.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .dynamics import (ConvergenceReport, ForceField, IntegratorConfig, State,
                       evolve)
from .errors import DegenerateStateError, DomainError, IntegrationError, PreconditionError

NORM_TOL = 1e-8


@dataclass
class LinearOperator:
    """Matrix-free symmetric operator with a diagonal weighted inner product
    ``<a, b> = sum(w * a * b)``."""

    apply: Callable[[np.ndarray], np.ndarray]
    dim: int
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.weights is None:
            self.weights = np.ones(self.dim)
        else:
            self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (self.dim,) or np.any(self.weights <= 0):
            raise DomainError("weights must be a positive vector of length dim")

    @classmethod
    def from_matrix(cls, A, weights=None) -> "LinearOperator":
        """Wrap a dense or scipy sparse matrix (symmetric under ``weights``)."""
        n = A.shape[0]
        if A.shape != (n, n):
            raise DomainError("matrix must be square")
        return cls(lambda u: A @ u, n, weights)

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(self.apply(u), dtype=float)

    def inner(self, a, b) -> float:
        return float(np.dot(self.weights * a, b))

    def norm(self, a) -> float:
        return math.sqrt(self.inner(a, a))

    def negated(self) -> "LinearOperator":
        return LinearOperator(lambda u: -self(u), self.dim, self.weights)


@dataclass
class EigenResult:
    eigenvalue: float
    eigenvector: np.ndarray
    residual: float
    report: ConvergenceReport = field(default_factory=ConvergenceReport)


def weighted_inner(a, b, weights=None) -> float:
    if weights is None:
        return float(np.dot(a, b))
    return float(np.dot(weights * a, b))


def _require_normalized(op: LinearOperator, u):
    nrm2 = op.inner(u, u)
    if abs(nrm2 - 1.0) > NORM_TOL:
        raise PreconditionError(f"<u,u> = {nrm2!r}; expected 1")


def rayleigh_quotient(op: LinearOperator, u) -> float:
    u = np.asarray(u, dtype=float)
    _require_normalized(op, u)
    return op.inner(u, op(u))


def _rayleigh_force(op, u, sign):
    Au = op(u)
    rho = op.inner(u, Au)
    return sign * (rho * u - Au)


def rayleigh_force(op: LinearOperator, u) -> np.ndarray:
    """``-A u + rho(u) u``, the descent direction of the Rayleigh quotient."""
    u = np.asarray(u, dtype=float)
    _require_normalized(op, u)
    return _rayleigh_force(op, u, 1.0)


def rayleigh_field(op: LinearOperator, mode: str = "min") -> ForceField:
    """Force field for :func:`evolve`; ``mode='max'`` uses ``-F``.

    No precondition check here: the evolution loop keeps ``u`` normalized
    through its hooks.
    """
    if mode not in ("min", "max"):
        raise DomainError("mode must be 'min' or 'max'")
    sign = 1.0 if mode == "min" else -1.0
    return ForceField(lambda u: _rayleigh_force(op, u, sign))


def renormalize(u, weights=None) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    nrm2 = weighted_inner(u, u, weights)
    if not math.isfinite(nrm2):
        raise IntegrationError("cannot normalize a non-finite vector")
    if not nrm2 > 0:
        raise DegenerateStateError("cannot normalize a zero vector")
    return u / math.sqrt(nrm2)


def deflate(u, basis: Sequence[np.ndarray], weights=None) -> np.ndarray:
    """Remove the components of ``u`` along an orthonormal ``basis``.

    Classical Gram-Schmidt followed by one reorthogonalization pass, which
    keeps the result orthogonal to machine precision.
    """
    u = np.array(u, dtype=float)
    if not basis:
        return u
    scale = math.sqrt(max(weighted_inner(u, u, weights), 0.0))
    for _ in range(2):
        for b in basis:
            u -= weighted_inner(b, u, weights) * b
    rest = math.sqrt(max(weighted_inner(u, u, weights), 0.0))
    if rest <= 1e-12 * scale or rest == 0.0:
        raise DegenerateStateError("vector lies in the span of the deflation basis")
    return u


def estimate_dt_max(E0: float, E1: float, Emax: float) -> float:
    """Largest stable symplectic Euler step ``2 / (sqrt(E1-E0) + sqrt(Emax-E0))``."""
    if not (Emax > E1 > E0):
        raise DomainError("need Emax > E1 > E0")
    return 2.0 / (math.sqrt(E1 - E0) + math.sqrt(Emax - E0))


def power_estimate(op: LinearOperator, iters: int = 50, shift: float = 0.0,
                   start=None) -> float:
    """Rough dominant eigenvalue of ``A - shift`` (plus ``shift``) after a fixed
    number of power steps.  Meant for step-size heuristics only."""
    w = np.ones(op.dim) if start is None else np.asarray(start, dtype=float)
    # a little structure breaks symmetric starting vectors
    w = w + 0.1 * np.cos(np.arange(op.dim))
    w = renormalize(w, op.weights)
    rho = 0.0
    for _ in range(iters):
        z = op(w) - shift * w
        rho = op.inner(w, z)
        w = renormalize(z, op.weights)
    return rho + shift


def _project_out(x, basis, weights):
    for b in basis:
        x = x - weighted_inner(b, x, weights) * b
    return x


def _coordinate_vectors(n):
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        yield e


def _start_vector(op: LinearOperator, basis, start):
    first = [] if start is None else [np.asarray(start, dtype=float)]
    candidates = itertools.chain(first, [np.ones(op.dim)], _coordinate_vectors(op.dim))
    for cand in candidates:
        try:
            return renormalize(deflate(cand, basis, op.weights), op.weights)
        except DegenerateStateError:
            continue
    raise DegenerateStateError("no start vector outside the deflation basis")


def solve_lowest(op: LinearOperator, m: int, cfg: IntegratorConfig,
                 mode: str = "min", start=None, project_velocity: bool = False,
                 hooks: Sequence = (), record: bool = True) -> List[EigenResult]:
    """First ``m`` eigenpairs (ascending for ``min``, descending for ``max``).

    Each pair is an :func:`evolve` run on the Rayleigh force, projected off
    the earlier pairs.  After every step the position is deflated against
    earlier pairs and renormalized;
    velocities are left alone unless ``project_velocity`` is set, in which
    case they are projected onto the tangent space of the constraint.

    ``cfg.residual_tol`` and ``cfg.velocity_tol`` apply in the weighted norm.
    Extra ``hooks`` run after the built-in ones.
    """
    if m < 1:
        raise DomainError("m must be >= 1")
    if m > op.dim:
        raise DomainError("m exceeds the operator dimension")
    base = rayleigh_field(op, mode)
    w = op.weights
    results: List[EigenResult] = []
    basis: List[np.ndarray] = []
    for _ in range(m):
        u0 = _start_vector(op, basis, start)
        frozen = list(basis)
        # earlier vectors are only accurate to the tolerance, so the raw force
        # keeps a small component along them; stationarity is measured on the
        # deflated subspace
        field_ = base if not frozen else ForceField(
            lambda u, frozen=frozen: _project_out(base(u), frozen, w))

        def constrain(s: State, frozen=frozen):
            s.u = renormalize(deflate(s.u, frozen, w), w)
            if project_velocity:
                s.v = s.v - op.inner(s.u, s.v) * s.u
                for b in frozen:
                    s.v = s.v - op.inner(b, s.v) * b
            return s

        state, report = evolve(State(u0), field_, cfg, hooks=(constrain, *hooks),
                               aux=lambda s: op.inner(s.u, op(s.u)),
                               norm=op.norm, record=record)
        u = state.u
        Au = op(u)
        rho = op.inner(u, Au)
        results.append(EigenResult(rho, u, op.norm(Au - rho * u), report))
        basis.append(u)
    return results


def suggest_config(op: LinearOperator, gap: Optional[float] = None, safety: float = 0.5,
                   residual_tol: float = 1e-8, max_steps: int = 500_000,
                   power_iters: int = 60) -> IntegratorConfig:
    """Step size and damping from coarse spectrum estimates.

    The spread ``Emax - Emin`` comes from short power runs; the spectral gap
    (unknown in general) defaults to 1% of the spread.  Damping is critical
    for the gap mode, ``eta = 2 sqrt(gap)``.
    """
    top = power_estimate(op, power_iters)
    # second run, shifted so the opposite end of the spectrum dominates
    bottom = power_estimate(op, power_iters, shift=top)
    lo, hi = min(top, bottom), max(top, bottom)
    spread = 1.05 * (hi - lo) + 1e-12
    if gap is None:
        gap = 0.01 * spread
    eta = 2.0 * math.sqrt(gap)
    dt = safety * estimate_dt_max(0.0, gap, spread) if spread > gap else 0.1
    return IntegratorConfig(dt=dt, damping=eta, max_steps=max_steps,
                            residual_tol=residual_tol, velocity_tol=residual_tol)

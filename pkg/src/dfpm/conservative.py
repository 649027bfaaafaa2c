"""Potential-energy machinery: conservativity test, work integrals, energy
monitor, damping strategies and the closed-form damped oscillator."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import ForceField, State
from .errors import (DomainError, IndefiniteHessianError, IntegrationError,
                     UnsupportedOperationError)


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    potential: float
    total: float


@dataclass(frozen=True)
class OscillatorParams:
    """``mu u'' + eta u' = -k u`` with ``u(0) = u0``, ``u'(0) = v0``."""

    mu: float = 1.0
    eta: float = 0.0
    k: float = 1.0
    u0: float = 1.0
    v0: float = 0.0

    def __post_init__(self):
        if not (self.mu > 0 and self.k > 0 and self.eta >= 0):
            raise DomainError("need mu > 0, k > 0, eta >= 0")

    @property
    def critical_damping(self) -> float:
        return critical_damping(self.mu, self.k)

    def roots(self):
        """Characteristic roots ``-eta/2mu +- sqrt(eta^2/4mu^2 - k/mu)`` (complex)."""
        a = -0.5 * self.eta / self.mu
        disc = complex(a * a - self.k / self.mu)
        s = np.sqrt(disc)
        return a + s, a - s


def _jacobian_fd(field: ForceField, point: np.ndarray, h: float) -> np.ndarray:
    n = point.size
    J = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        fp, fm = field(point + e), field(point - e)
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise IntegrationError(f"non-finite force near point along axis {j}")
        J[:, j] = (fp - fm) / (2 * h)
    return J


def check_conservative(field: ForceField, point, fd_step: float = 1e-5,
                       tol: float = 1e-6) -> bool:
    """True when the central-difference Jacobian is symmetric within ``tol``."""
    if not fd_step > 0:
        raise DomainError("fd_step must be positive")
    point = np.asarray(point, dtype=float)
    J = _jacobian_fd(field, point, fd_step)
    return bool(np.max(np.abs(J - J.T), initial=0.0) <= tol)


def work_integral(field: ForceField, target, quad_points: int = 65,
                  reverse: bool = False) -> float:
    """Work ``W = int F . dr`` from the origin to ``target`` along coordinate axes.

    The path visits axes 1..n in order (n..1 with ``reverse``); each leg is a
    composite trapezoid with ``quad_points`` nodes.  For a conservative field
    ``W = -(V(target) - V(0))``.
    """
    if quad_points < 2:
        raise DomainError("quad_points must be >= 2")
    target = np.asarray(target, dtype=float)
    axes = range(target.size - 1, -1, -1) if reverse else range(target.size)
    pos = np.zeros_like(target)
    total = 0.0
    for i in axes:
        if target[i] == 0.0:
            continue
        s = np.linspace(0.0, target[i], quad_points)
        vals = np.empty(quad_points)
        for q, si in enumerate(s):
            pos[i] = si
            f = field(pos)
            if not np.isfinite(f[i]):
                raise IntegrationError(f"non-finite force on leg {i}")
            vals[q] = f[i]
        pos[i] = target[i]
        total += float(np.trapezoid(vals, s))
    return total


def work_integral_estimate(field: ForceField, target, quad_points: int = 65,
                           reverse: bool = False):
    """Work integral plus an error estimate from doubling the node count.

    Returns ``(W_fine, err)`` with ``err = |W_fine - W_coarse| / 3``, the
    Richardson estimate for the second-order trapezoid rule.
    """
    coarse = work_integral(field, target, quad_points, reverse)
    fine = work_integral(field, target, 2 * quad_points - 1, reverse)
    return fine, abs(fine - coarse) / 3.0


def kinetic_energy(v, mass) -> float:
    return float(0.5 * np.sum(np.asarray(mass) * np.asarray(v) ** 2))


def total_energy(state: State, field: ForceField, mass=1.0) -> EnergyBreakdown:
    if field.potential is None:
        raise UnsupportedOperationError("force field has no potential")
    T = kinetic_energy(state.v, mass)
    V = float(field.potential(state.u))
    return EnergyBreakdown(T, V, T + V)


def critical_damping(mass: float, stiffness: float) -> float:
    if not (mass > 0 and stiffness > 0):
        raise DomainError("mass and stiffness must be positive")
    return 2.0 * math.sqrt(stiffness * mass)


def _hessian_columns(field: ForceField, u: np.ndarray) -> np.ndarray:
    n = u.size
    eye = np.eye(n)
    return np.column_stack([field.hessian_vec(u, eye[:, j]) for j in range(n)])


def hessian_min_eigenvalue(field: ForceField, u, max_iter: int = 50,
                           rtol: float = 1e-4) -> float:
    """Smallest Hessian eigenvalue by power iteration on ``sigma*I - H``.

    ``sigma`` is the Gershgorin bound from probing ``hessian_vec`` with the
    coordinate vectors, so ``sigma*I - H`` is positive semidefinite and its
    dominant eigenvalue is ``sigma - lambda_min``.
    """
    if field.hessian_vec is None:
        raise UnsupportedOperationError("force field has no Hessian-vector product")
    u = np.asarray(u, dtype=float)
    H = _hessian_columns(field, u)
    sigma = float(np.max(np.sum(np.abs(H), axis=0)))
    if sigma == 0.0:
        return 0.0
    w = np.ones(u.size) / math.sqrt(u.size)
    mu = None
    for _ in range(max_iter):
        z = sigma * w - field.hessian_vec(u, w)
        nz = np.linalg.norm(z)
        if nz == 0.0:
            # w is an eigenvector with eigenvalue sigma of H; restart off it
            w = np.roll(w, 1) - w
            w /= np.linalg.norm(w)
            continue
        w = z / nz
        new_mu = float(w @ (sigma * w - field.hessian_vec(u, w)))
        if mu is not None and abs(new_mu - mu) <= rtol * abs(new_mu):
            mu = new_mu
            break
        mu = new_mu
    return sigma - mu


def adaptive_damping(field: ForceField, u, factor: float) -> float:
    """``factor * sqrt(lambda_min(hess V(u)))``; the Hessian must be positive definite."""
    if not factor > 0:
        raise DomainError("factor must be positive")
    lam = hessian_min_eigenvalue(field, u)
    if not lam > 0:
        raise IndefiniteHessianError(f"smallest Hessian eigenvalue {lam:.3e} is not positive")
    return factor * math.sqrt(lam)


def oscillator_analytic(p: OscillatorParams, t):
    """Exact ``(u(t), v(t))`` in the under-, critically- and over-damped regimes."""
    t = np.asarray(t, dtype=float)
    a = 0.5 * p.eta / p.mu
    w2 = p.k / p.mu - a * a
    # relative test so critical damping is detected despite rounding in eta
    if abs(w2) <= 1e-12 * p.k / p.mu:
        c2 = p.v0 + a * p.u0
        e = np.exp(-a * t)
        u = (p.u0 + c2 * t) * e
        v = (c2 - a * (p.u0 + c2 * t)) * e
    elif w2 > 0:
        w = math.sqrt(w2)
        b = (p.v0 + a * p.u0) / w
        e = np.exp(-a * t)
        c, s = np.cos(w * t), np.sin(w * t)
        u = e * (p.u0 * c + b * s)
        v = e * (-a * (p.u0 * c + b * s) + w * (-p.u0 * s + b * c))
    else:
        g = math.sqrt(-w2)
        r1, r2 = -a + g, -a - g
        c1 = (p.v0 - r2 * p.u0) / (r1 - r2)
        c2 = p.u0 - c1
        u = c1 * np.exp(r1 * t) + c2 * np.exp(r2 * t)
        v = c1 * r1 * np.exp(r1 * t) + c2 * r2 * np.exp(r2 * t)
    if u.ndim == 0:
        return float(u), float(v)
    return u, v


def oscillator_field(k: float = 1.0) -> ForceField:
    """``F(u) = -k u`` with potential ``k u^2 / 2``."""
    return ForceField(lambda u: -k * u,
                      potential=lambda u: 0.5 * k * float(np.dot(u, u)),
                      hessian_vec=lambda u, w: k * w)


def exponential_potential_field() -> ForceField:
    """``V = exp(u1^2 + 2 u2^2)``: globally convex with its minimum at the origin."""

    def V(u):
        return math.exp(u[0] ** 2 + 2 * u[1] ** 2)

    def F(u):
        e = V(u)
        return np.array([-2 * u[0] * e, -4 * u[1] * e])

    def Hv(u, w):
        e = V(u)
        H = e * np.array([[2 + 4 * u[0] ** 2, 8 * u[0] * u[1]],
                          [8 * u[0] * u[1], 4 + 16 * u[1] ** 2]])
        return H @ w

    return ForceField(F, potential=V, hessian_vec=Hv)

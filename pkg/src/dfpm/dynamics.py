"""Damped particle dynamics: state, force fields, symplectic steppers, evolution loop.

The system integrated here is

    mu * u'' + eta * u' = F(u)

in artificial time.  Its stationary points (u' = u'' = 0) are exactly the
roots of ``F``, so integrating until the motion dies out solves ``F(u) = 0``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import DivergenceError, DomainError, IntegrationError

ArrayLike = Union[float, Sequence[float], np.ndarray]
Hook = Callable[["State"], Optional["State"]]


@dataclass
class State:
    """Positions ``u``, velocities ``v`` and artificial time ``t``."""

    u: np.ndarray
    v: np.ndarray = None
    t: float = 0.0

    def __post_init__(self):
        self.u = np.array(self.u, dtype=float, ndmin=1)
        if self.v is None:
            self.v = np.zeros_like(self.u)
        else:
            self.v = np.array(self.v, dtype=float, ndmin=1)
        if self.u.shape != self.v.shape:
            raise DomainError(
                f"position shape {self.u.shape} != velocity shape {self.v.shape}")
        self.t = float(self.t)

    @property
    def dim(self) -> int:
        return self.u.size

    def copy(self) -> "State":
        return State(self.u.copy(), self.v.copy(), self.t)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v))
                    and np.isfinite(self.t))


@dataclass(frozen=True)
class ForceField:
    """A force ``F(u)`` with optional potential ``V`` (``F = -grad V``) and
    Hessian-vector product ``(u, w) -> hess V(u) @ w``."""

    evaluate: Callable[[np.ndarray], np.ndarray]
    potential: Optional[Callable[[np.ndarray], float]] = None
    hessian_vec: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(self.evaluate(u), dtype=float)

    @classmethod
    def linear(cls, A) -> "ForceField":
        """``F(u) = A u``.  A potential is attached only when ``A`` is symmetric."""
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DomainError("A must be a square matrix")
        if np.allclose(A, A.T, rtol=0.0, atol=1e-14 * max(1.0, np.abs(A).max())):
            return cls(lambda u: A @ u,
                       potential=lambda u: -0.5 * float(u @ (A @ u)),
                       hessian_vec=lambda u, w: -(A @ w))
        return cls(lambda u: A @ u)

    @classmethod
    def from_potential(cls, potential, gradient, hessian_vec=None) -> "ForceField":
        """Build ``F = -gradient`` from a potential and its gradient."""
        return cls(lambda u: -np.asarray(gradient(u), dtype=float),
                   potential=potential, hessian_vec=hessian_vec)

    def negated(self) -> "ForceField":
        """The field ``-F``; the potential and Hessian flip sign with it."""
        pot = None if self.potential is None else (lambda u: -self.potential(u))
        hv = None if self.hessian_vec is None else (lambda u, w: -self.hessian_vec(u, w))
        return ForceField(lambda u: -self(u), potential=pot, hessian_vec=hv)


class DampingSchedule:
    """Damping coefficient ``eta`` as a function of the current position.

    Use :meth:`constant` for a fixed (scalar or per-component) value and
    :meth:`adaptive` for ``eta(t) = factor * sqrt(lambda_min(hess V(u(t))))``.
    """

    def __init__(self, variant: str, eta=None, factor=None, field=None):
        self.variant = variant
        self.eta = eta
        self.factor = factor
        self.field = field

    @classmethod
    def constant(cls, eta: ArrayLike) -> "DampingSchedule":
        eta = np.asarray(eta, dtype=float)
        if np.any(~np.isfinite(eta)) or np.any(eta < 0):
            raise DomainError("damping must be finite and non-negative")
        return cls("constant", eta=float(eta) if eta.ndim == 0 else eta)

    @classmethod
    def adaptive(cls, factor: float, field: ForceField) -> "DampingSchedule":
        if not factor > 0:
            raise DomainError("adaptive damping factor must be positive")
        return cls("adaptive", factor=float(factor), field=field)

    def __call__(self, u: np.ndarray, t: float = 0.0):
        if self.variant == "constant":
            return self.eta
        from .conservative import adaptive_damping
        return adaptive_damping(self.field, u, self.factor)

    def __repr__(self):
        if self.variant == "constant":
            return f"DampingSchedule.constant({self.eta!r})"
        return f"DampingSchedule.adaptive(factor={self.factor!r})"


STEPPERS = ("symplectic_euler", "stormer_verlet")


@dataclass
class IntegratorConfig:
    dt: float
    mass: ArrayLike = 1.0
    damping: Union[ArrayLike, DampingSchedule] = 1.0
    max_steps: int = 100_000
    residual_tol: float = 1e-8
    velocity_tol: float = 1e-8
    method: str = "symplectic_euler"
    # None disables the divergence guard
    divergence_factor: Optional[float] = 1e6

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise DomainError("dt must be positive")
        mass = np.asarray(self.mass, dtype=float)
        if np.any(~np.isfinite(mass)) or np.any(mass <= 0):
            raise DomainError("masses must be positive")
        self.mass = float(mass) if mass.ndim == 0 else mass
        if not isinstance(self.damping, DampingSchedule):
            self.damping = DampingSchedule.constant(self.damping)
        if not (self.residual_tol > 0 and self.velocity_tol > 0):
            raise DomainError("tolerances must be positive")
        if int(self.max_steps) < 0:
            raise DomainError("max_steps must be non-negative")
        self.max_steps = int(self.max_steps)
        if self.method not in STEPPERS:
            raise DomainError(f"unknown method {self.method!r}; expected one of {STEPPERS}")


@dataclass
class ConvergenceReport:
    steps: int = 0
    final_residual: float = float("nan")
    residual_trace: list = field(default_factory=list)
    aux_trace: list = field(default_factory=list)
    converged: bool = False
    wall_time: float = 0.0

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.residual_trace])

    @property
    def residuals(self) -> np.ndarray:
        return np.array([r for _, r in self.residual_trace])

    @property
    def aux_values(self) -> np.ndarray:
        return np.array([a for _, a in self.aux_trace])


def _check_finite(state: State, force: np.ndarray, step: int):
    if not np.all(np.isfinite(force)):
        raise IntegrationError("non-finite force value", step)
    if not state.is_finite():
        raise IntegrationError("non-finite state", step)


def _euler_update(state: State, force: np.ndarray, eta, mass, dt) -> State:
    # overflow surfaces through the explicit finiteness checks
    with np.errstate(over="ignore", invalid="ignore"):
        v = state.v + dt * (force - eta * state.v) / mass
        u = state.u + dt * v
    return State(u, v, state.t + dt)


def _verlet_update(state: State, force: np.ndarray, field: ForceField, eta, mass, dt):
    half = 0.5 * dt
    with np.errstate(over="ignore", invalid="ignore"):
        v_half = state.v + half * (force - eta * state.v) / mass
        u = state.u + dt * v_half
    new_force = field(u)
    v = v_half + half * (new_force - eta * v_half) / mass
    return State(u, v, state.t + dt), new_force


def _validate(state: State, force: np.ndarray, cfg: IntegratorConfig):
    if force.shape != state.u.shape:
        raise DomainError(f"force shape {force.shape} != state shape {state.u.shape}")
    for name, arr in (("mass", cfg.mass), ("damping", cfg.damping(state.u, state.t))):
        if np.ndim(arr) and np.shape(arr) != state.u.shape:
            raise DomainError(f"per-component {name} has wrong shape {np.shape(arr)}")


def step_symplectic_euler(state: State, field: ForceField, cfg: IntegratorConfig,
                          force: Optional[np.ndarray] = None, step: int = 0) -> State:
    """One damped symplectic Euler step (velocity first, then position).

    ``force`` may carry a precomputed ``F(state.u)`` to avoid a second
    evaluation.
    """
    if force is None:
        force = field(state.u)
    _validate(state, force, cfg)
    if not np.all(np.isfinite(force)):
        raise IntegrationError("non-finite force value", step)
    eta = cfg.damping(state.u, state.t)
    return _euler_update(state, force, eta, cfg.mass, cfg.dt)


def step_stormer_verlet(state: State, field: ForceField, cfg: IntegratorConfig,
                        force: Optional[np.ndarray] = None, step: int = 0) -> State:
    """One damped kick-drift-kick step.

    Each half kick uses the velocity available at that point; no implicit
    solve for the damping term.
    """
    new, _ = _stormer_verlet_with_force(state, field, cfg, force, step)
    return new


def _stormer_verlet_with_force(state, field, cfg, force=None, step=0):
    if force is None:
        force = field(state.u)
    _validate(state, force, cfg)
    if not np.all(np.isfinite(force)):
        raise IntegrationError("non-finite force value", step)
    eta = cfg.damping(state.u, state.t)
    return _verlet_update(state, force, field, eta, cfg.mass, cfg.dt)


def residual_norm(state: State, field: ForceField, norm=None) -> float:
    """Stationarity measure ``||F(u)||`` (Euclidean unless ``norm`` is given)."""
    force = field(state.u)
    if force.shape != state.u.shape:
        raise DomainError("force and state dimensions differ")
    if not np.all(np.isfinite(force)):
        raise IntegrationError("non-finite force value")
    return float(np.linalg.norm(force) if norm is None else norm(force))


def evolve(state: State, field: ForceField, cfg: IntegratorConfig,
           hooks: Sequence[Hook] = (), aux: Optional[Callable[[State], float]] = None,
           norm: Optional[Callable[[np.ndarray], float]] = None,
           record: bool = True):
    """Integrate until ``||F(u)|| <= residual_tol`` and ``||v|| <= velocity_tol``.

    Parameters
    ----------
    state : State
        Initial condition; not modified.
    field : ForceField
    cfg : IntegratorConfig
    hooks : sequence of callables
        Called after every step with the new state.  A hook may mutate the
        state in place or return a replacement (e.g. renormalization).
    aux : callable, optional
        Scalar diagnostic (energy, Rayleigh quotient) recorded each step.
    norm : callable, optional
        Vector norm used for the residual and velocity tests.
    record : bool
        Keep per-step traces.  The final entry is always kept.

    Returns
    -------
    (State, ConvergenceReport)
        Running out of ``max_steps`` is not an error; check ``report.converged``.

    Raises
    ------
    DivergenceError
        The residual exceeded ``divergence_factor`` times its running minimum.
    IntegrationError
        A non-finite value appeared.
    """
    norm = np.linalg.norm if norm is None else norm
    start = time.perf_counter()
    report = ConvergenceReport()
    state = state.copy()
    force = field(state.u)
    _validate(state, force, cfg)
    _check_finite(state, force, 0)

    def log(s, r, keep):
        if keep:
            report.residual_trace.append((s.t, r))
            if aux is not None:
                report.aux_trace.append((s.t, float(aux(s))))

    r = float(norm(force))
    log(state, r, True)
    min_r = r
    step = 0
    converged = r <= cfg.residual_tol and norm(state.v) <= cfg.velocity_tol
    verlet = cfg.method == "stormer_verlet"
    while not converged and step < cfg.max_steps:
        step += 1
        eta = cfg.damping(state.u, state.t)
        if verlet:
            new, new_force = _verlet_update(state, force, field, eta, cfg.mass, cfg.dt)
        else:
            new, new_force = _euler_update(state, force, eta, cfg.mass, cfg.dt), None
        if not new.is_finite():
            raise IntegrationError("non-finite state", step)
        for hook in hooks:
            try:
                out = hook(new)
            except IntegrationError as exc:
                if exc.step is not None:
                    raise
                raise type(exc)(str(exc), step) from exc
            if out is not None:
                new = out
        if hooks or new_force is None:
            new_force = field(new.u)
        _check_finite(new, new_force, step)
        state, force = new, new_force
        r = float(norm(force))
        converged = r <= cfg.residual_tol and norm(state.v) <= cfg.velocity_tol
        log(state, r, record or converged or step == cfg.max_steps)
        min_r = min(min_r, r)
        if (cfg.divergence_factor is not None and min_r > 0
                and r >= cfg.divergence_factor * min_r):
            raise DivergenceError(
                f"residual {r:.3e} exceeds {cfg.divergence_factor:g} x minimum {min_r:.3e}",
                step)

    report.steps = step
    report.final_residual = r
    report.converged = bool(converged)
    report.wall_time = time.perf_counter() - start
    return state, report

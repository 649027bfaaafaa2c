"""Benchmark drivers: Helium ground state, iteration scaling, damping demo."""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from .analysis import BenchmarkRecord, fit_scaling_exponent
from .baselines import PowerConfig, choose_shift, shifted_power
from .conservative import exponential_potential_field, hessian_min_eigenvalue
from .dynamics import DampingSchedule, IntegratorConfig, State, evolve
from .eigen import solve_lowest
from .errors import DFPMError, DomainError
from .helium import (DEFAULT_DAMPING, DEFAULT_MASS, DEFAULT_R, REFERENCE_TABLE,
                     HeliumOperator, build_grid, default_dt, estimate_helium_dt,
                     initial_guess)

log = logging.getLogger(__name__)

TRACE_HEADER = ("t", "residual", "rayleigh", "energy")


@dataclass
class HeliumRun:
    record: BenchmarkRecord
    vector: Optional[np.ndarray] = None
    trace: List[tuple] = field(default_factory=list)


def resolve_dt(k: int, op: HeliumOperator, dt: Union[None, str, float]) -> float:
    """``None``: tabulated step when available, else the estimated bound."""
    if dt is None:
        return default_dt(k) if k in REFERENCE_TABLE else estimate_helium_dt(op)
    if dt == "auto":
        return estimate_helium_dt(op)
    dt = float(dt)
    if not dt > 0:
        raise DomainError("dt must be positive")
    return dt


def helium_ground_state(k: int, tol: float = 1e-10, dt=None, method: str = "dfpm",
                        R: float = DEFAULT_R, damping: float = DEFAULT_DAMPING,
                        max_steps: int = 50_000, trace: bool = False) -> HeliumRun:
    """Lowest eigenpair of the discrete Helium Hamiltonian on grid ``k``.

    Solver failures do not raise; they produce a record with
    ``converged=False`` and a diagnostic.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    if method not in ("dfpm", "power"):
        raise DomainError(f"unknown method {method!r}")
    grid = build_grid(k, R)
    op = HeliumOperator(grid)
    u0 = initial_guess(grid)
    start = time.perf_counter()
    rows: List[tuple] = []
    step = float("nan")
    try:
        if method == "dfpm":
            step = resolve_dt(k, op, dt)
            cfg = IntegratorConfig(dt=step, mass=DEFAULT_MASS, damping=damping,
                                   max_steps=max_steps, residual_tol=tol, velocity_tol=tol)
            hooks = ()
            if trace:
                def monitor(s: State):
                    Hu = op(s.u)
                    rho = op.inner(s.u, Hu)
                    res = op.norm(rho * s.u - Hu)
                    energy = 0.5 * DEFAULT_MASS * op.inner(s.v, s.v) + 0.5 * rho
                    rows.append((s.t, res, rho, energy))
                hooks = (monitor,)
            res = solve_lowest(op, 1, cfg, start=u0, hooks=hooks, record=False)[0]
            iterations, converged = res.report.steps, res.report.converged
            diag = "" if converged else f"no convergence in {max_steps} steps"
        else:
            shift = choose_shift(op, E0_est=op.inner(u0, op(u0)))
            pcfg = PowerConfig(shift=shift, tol=1e-15, max_iters=max_steps * 20,
                               residual_tol=tol)
            res = shifted_power(op, pcfg, start=u0, record=trace)
            if trace:
                rows = [(t, r, rho, float("nan")) for (t, r), (_, rho)
                        in zip(res.report.residual_trace, res.report.aux_trace)]
            iterations, converged, diag = res.report.steps, True, ""
        E0 = res.eigenvalue
        vec = res.eigenvector
    except DFPMError as exc:
        log.warning("helium k=%d (%s) failed: %s", k, method, exc)
        E0, converged, diag, vec = float("nan"), False, str(exc), None
        iterations = getattr(exc, "step", None) or getattr(exc, "iterations", None) or 0
    wall = time.perf_counter() - start
    rec = BenchmarkRecord(k=k, N=grid.N, dt=step, E0=E0, iterations=iterations,
                          wall_time_s=wall, method=method, converged=converged,
                          diagnostic=diag)
    return HeliumRun(rec, vec, rows)


def run_helium(k: int, tol: float = 1e-10, dt=None, method: str = "dfpm",
               **kwargs) -> BenchmarkRecord:
    return helium_ground_state(k, tol, dt, method, **kwargs).record


def write_trace(path, rows: Sequence[tuple]):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER)
        for row in rows:
            writer.writerow([repr(float(x)) for x in row])


def scaling_study(ks: Sequence[int], method: str = "dfpm", tol: float = 1e-10,
                  dt=None, **kwargs):
    """Run each grid and fit iterations against N on log-log axes."""
    records = [run_helium(k, tol, dt, method, **kwargs) for k in ks]
    bad = [r for r in records if not r.converged]
    if bad:
        raise DFPMError(f"runs failed for k = {[r.k for r in bad]}")
    fit = fit_scaling_exponent([(r.N, r.iterations) for r in records])
    return records, fit


@dataclass
class DemoRun:
    label: str
    times: np.ndarray
    positions: np.ndarray
    damping: np.ndarray
    lambda_min: np.ndarray
    time_to_tol: float
    converged: bool


def _time_below(times, norms, tol):
    """First time after which ``norms`` stays below ``tol``."""
    above = np.nonzero(norms >= tol)[0]
    if len(above) == 0:
        return float(times[0])
    i = above[-1] + 1
    return float(times[i]) if i < len(times) else math.inf


def damping_demo(start=(1.0, 1.0), dt: float = 0.005, tol: float = 1e-6,
                 factor: float = 1.9, constant_eta: float = 1.0,
                 max_steps: int = 200_000) -> Dict[str, DemoRun]:
    """Minimize ``V = exp(u1^2 + 2 u2^2)`` with constant and curvature-adapted damping.

    Returns runs keyed ``"constant"`` (``eta = constant_eta``) and
    ``"adaptive"`` (``eta(t) = factor * sqrt(lambda_min(hess V(u(t))))``).
    """
    field_ = exponential_potential_field()
    out = {}
    for label, sched in (("constant", DampingSchedule.constant(constant_eta)),
                         ("adaptive", DampingSchedule.adaptive(factor, field_))):
        cfg = IntegratorConfig(dt=dt, damping=sched, max_steps=max_steps,
                               residual_tol=tol, velocity_tol=tol)
        pts, etas, lams, ts = [], [], [], []

        def rec(s: State):
            ts.append(s.t)
            pts.append(s.u.copy())
            etas.append(float(sched(s.u, s.t)))
            lams.append(hessian_min_eigenvalue(field_, s.u))

        s0 = State(np.asarray(start, dtype=float))
        rec(s0)
        _, report = evolve(s0, field_, cfg, hooks=(rec,), record=False)
        P = np.array(pts)
        norms = np.linalg.norm(P, axis=1)
        out[label] = DemoRun(label, np.array(ts), P, np.array(etas), np.array(lams),
                             _time_below(np.array(ts), norms, tol),
                             bool(report.converged and norms[-1] < tol))
    return out

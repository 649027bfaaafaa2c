"""Reference eigensolvers: shifted power iteration and a cyclic Jacobi oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dynamics import ConvergenceReport
from .eigen import EigenResult, LinearOperator, power_estimate, renormalize
from .errors import DomainError, NoConvergenceError


@dataclass
class PowerConfig:
    shift: float = 0.0
    tol: float = 1e-12
    max_iters: int = 1_000_000
    # optional extra stop condition on ||A w - rho w|| (weighted)
    residual_tol: Optional[float] = None

    def __post_init__(self):
        if not self.tol > 0:
            raise DomainError("tol must be positive")
        if self.residual_tol is not None and not self.residual_tol > 0:
            raise DomainError("residual_tol must be positive")


def shifted_power(op: LinearOperator, cfg: PowerConfig, start=None,
                  record: bool = False) -> EigenResult:
    """Power iteration on ``A - shift*I`` in the operator's weighted inner product.

    Stops when successive Rayleigh quotients differ by at most ``cfg.tol``
    (and, if ``cfg.residual_tol`` is set, the residual is below it) and
    returns the eigenvalue of ``A`` (the shift added back).  One iteration is
    one operator application.  A tie between
    dominant eigenvalues never settles and ends in :class:`NoConvergenceError`.
    """
    w = np.ones(op.dim) if start is None else np.asarray(start, dtype=float)
    w = renormalize(w, op.weights)
    report = ConvergenceReport()
    prev = None
    for it in range(1, cfg.max_iters + 1):
        z = op(w) - cfg.shift * w
        mu = op.inner(w, z)
        # residual of the current iterate, before it is replaced
        res = op.norm(z - mu * w)
        if record:
            report.residual_trace.append((float(it), res))
            report.aux_trace.append((float(it), mu + cfg.shift))
        if (prev is not None and abs(mu - prev) <= cfg.tol
                and (cfg.residual_tol is None or res <= cfg.residual_tol)):
            report.steps = it
            report.final_residual = res
            report.converged = True
            return EigenResult(mu + cfg.shift, w, res, report)
        w = renormalize(z, op.weights)
        prev = mu
    raise NoConvergenceError(f"shifted power iteration did not converge in {cfg.max_iters} iterations",
                             iterations=cfg.max_iters, estimate=prev + cfg.shift)


def choose_shift(op: LinearOperator, E0_est: float = None, iters: int = 200,
                 margin: float = 0.05) -> float:
    """Shift that makes the lowest eigenvalue dominant for :func:`shifted_power`.

    ``sigma = E0_est + 0.5 (Emax_est - E0_est) + eps`` with ``eps`` a
    ``margin`` fraction of the spread.  Plain power iteration underestimates
    ``Emax`` and any Rayleigh quotient overestimates ``E0``; ``eps`` absorbs
    the first error, so ``|E0 - sigma| > |Emax - sigma|`` holds for
    reasonable estimates.
    """
    dominant = power_estimate(op, iters)
    # on indefinite spectra the dominant end may be the bottom one
    Emax = max(dominant, power_estimate(op, iters, shift=dominant))
    if E0_est is None:
        u = renormalize(np.ones(op.dim), op.weights)
        E0_est = op.inner(u, op(u))
    spread = Emax - E0_est
    return E0_est + 0.5 * spread + margin * spread


def _jacobi_rotate(A, V, p, q):
    apq = A[p, q]
    theta = (A[q, q] - A[p, p]) / (2.0 * apq)
    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
    c = 1.0 / math.sqrt(t * t + 1.0)
    s = t * c
    Ap, Aq = A[:, p].copy(), A[:, q].copy()
    A[:, p] = c * Ap - s * Aq
    A[:, q] = s * Ap + c * Aq
    Ap, Aq = A[p, :].copy(), A[q, :].copy()
    A[p, :] = c * Ap - s * Aq
    A[q, :] = s * Ap + c * Aq
    A[p, q] = A[q, p] = 0.0
    Vp, Vq = V[:, p].copy(), V[:, q].copy()
    V[:, p] = c * Vp - s * Vq
    V[:, q] = s * Vp + c * Vq


def dense_eigen_oracle(matrix, off_tol: float = 1e-13, max_sweeps: int = 100):
    """All eigenpairs of a small dense symmetric matrix by cyclic Jacobi rotations.

    Sweeps until the off-diagonal Frobenius norm is at most ``off_tol``
    (relative to the full norm).  Returns ``(eigenvalues, eigenvectors)``
    with eigenvalues ascending and eigenvectors as orthonormal columns.
    """
    A = np.array(matrix, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DomainError("matrix must be square")
    n = A.shape[0]
    if n > 200:
        raise DomainError("dense oracle is limited to dimension <= 200")
    scale = max(1.0, float(np.abs(A).max()))
    if np.max(np.abs(A - A.T), initial=0.0) > 1e-12 * scale:
        raise DomainError("matrix is not symmetric")
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    ref = max(np.linalg.norm(A), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= off_tol * ref:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if A[p, q] != 0.0:
                    _jacobi_rotate(A, V, p, q)
    else:
        raise NoConvergenceError("Jacobi sweeps did not converge")
    vals = np.diag(A).copy()
    order = np.argsort(vals, kind="stable")
    return vals[order], V[:, order]

"""Solve F(u) = 0 by letting a damped particle system come to rest.

The main entry points are :func:`evolve` for general force fields,
:func:`solve_lowest` for symmetric eigenproblems and the Helium benchmark
in :mod:`dfpm.helium` / :mod:`dfpm.bench`.
"""

from .dynamics import (ConvergenceReport, DampingSchedule, ForceField, IntegratorConfig,
                       State, evolve, residual_norm, step_stormer_verlet,
                       step_symplectic_euler)
from .eigen import (EigenResult, LinearOperator, deflate, estimate_dt_max,
                    rayleigh_force, rayleigh_quotient, renormalize, solve_lowest)
from .errors import (DegenerateStateError, DFPMError, DivergenceError, DomainError,
                     IndefiniteHessianError, IntegrationError, NoConvergenceError,
                     PreconditionError, UnsupportedOperationError)

__version__ = "0.1.0"

"""Command-line driver.

Exit codes: 0 success, 2 no convergence, 3 invalid input.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import analysis, bench
from .conservative import OscillatorParams, critical_damping, oscillator_analytic, oscillator_field
from .dynamics import IntegratorConfig, State, evolve
from .eigen import LinearOperator, solve_lowest, suggest_config
from .errors import DFPMError, DivergenceError, DomainError, IntegrationError, NoConvergenceError
from .helium import mesh_size

EXIT_OK, EXIT_NO_CONVERGENCE, EXIT_INVALID = 0, 2, 3


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _dt_arg(text):
    if text == "auto":
        return text
    try:
        val = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a float or 'auto', got {text!r}")
    if not val > 0:
        raise argparse.ArgumentTypeError("dt must be positive")
    return val


def _emit(obj, out=None):
    text = json.dumps(obj, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    print(text)


def cmd_helium(args):
    run = bench.helium_ground_state(args.k, tol=args.tol, dt=args.dt, method=args.method,
                                    max_steps=args.max_steps, trace=bool(args.out))
    rec = run.record
    trace_path = None
    if args.out:
        trace_path = str(Path(args.out).with_suffix(".trace.csv"))
        bench.write_trace(trace_path, run.trace)
    payload = {"k": rec.k, "N": rec.N, "dt": rec.dt, "E0": rec.E0,
               "iterations": rec.iterations, "wall_time_s": rec.wall_time_s,
               "residual_trace_path": trace_path, "method": rec.method,
               "converged": rec.converged}
    if rec.diagnostic:
        payload["diagnostic"] = rec.diagnostic
    _emit(payload, args.out)
    return EXIT_OK if rec.converged else EXIT_NO_CONVERGENCE


def _read_matrix(path):
    from scipy.io import mmread
    try:
        A = mmread(path)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read Matrix Market file {path}: {exc}")
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError("matrix must be square")
    A = A.tocsr() if hasattr(A, "tocsr") else np.asarray(A, dtype=float)
    diff = abs(A - A.T)
    asym = diff.max() if hasattr(diff, "max") else np.max(diff)
    if asym > 1e-12 * max(1.0, abs(A).max()):
        raise InputError("matrix is not symmetric")
    return A


def cmd_eigen(args):
    A = _read_matrix(args.matrix)
    op = LinearOperator.from_matrix(A)
    if args.num < 1 or args.num > op.dim:
        raise InputError(f"--num must be between 1 and {op.dim}")
    cfg = suggest_config(op, residual_tol=args.tol, max_steps=args.max_steps)
    if args.dt is not None or args.damping is not None:
        cfg = IntegratorConfig(dt=cfg.dt if args.dt is None else args.dt,
                               damping=cfg.damping if args.damping is None else args.damping,
                               max_steps=cfg.max_steps, residual_tol=cfg.residual_tol,
                               velocity_tol=cfg.velocity_tol)
    results = solve_lowest(op, args.num, cfg, mode=args.mode, record=False)
    payload = {
        "dim": op.dim, "mode": args.mode, "dt": cfg.dt,
        "eigenvalues": [r.eigenvalue for r in results],
        "residuals": [r.residual for r in results],
        "iterations": [r.report.steps for r in results],
        "converged": all(r.report.converged for r in results),
    }
    _emit(payload, args.out)
    return EXIT_OK if payload["converged"] else EXIT_NO_CONVERGENCE


def cmd_oscillator(args):
    p = OscillatorParams(mu=args.mu, eta=args.eta, k=args.stiffness, u0=args.u0, v0=args.v0)
    nsteps = int(round(args.t_end / args.dt))
    cfg = IntegratorConfig(dt=args.dt, mass=p.mu, damping=p.eta, max_steps=nsteps,
                           residual_tol=1e-300, velocity_tol=1e-300, divergence_factor=None)
    field = oscillator_field(p.k)
    rows = []

    def rec(s):
        rows.append((s.t, float(s.u[0]), float(s.v[0])))

    s0 = State([p.u0], [p.v0])
    rec(s0)
    evolve(s0, field, cfg, hooks=(rec,), record=False)
    t = np.array([r[0] for r in rows])
    u = np.array([r[1] for r in rows])
    v = np.array([r[2] for r in rows])
    ue, ve = oscillator_analytic(p, t)
    below = np.nonzero(np.abs(u) >= 1e-6)[0]
    t_tol = float(t[below[-1] + 1]) if len(below) and below[-1] + 1 < len(t) else None
    payload = {"critical_damping": critical_damping(p.mu, p.k),
               "steps": nsteps, "max_error": float(np.max(np.abs(u - ue))),
               "time_to_1e-6": t_tol}
    if args.out:
        energy = 0.5 * p.mu * v ** 2 + 0.5 * p.k * u ** 2
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "u", "v", "u_exact", "v_exact", "energy"])
            for row in zip(t, u, v, ue, ve, energy):
                w.writerow([repr(float(x)) for x in row])
        payload["trace_path"] = args.out
    print(json.dumps(payload, indent=2))
    return EXIT_OK


def cmd_damping_demo(args):
    runs = bench.damping_demo()
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["run", "t", "u1", "u2", "eta", "lambda_min"])
            for label, run in runs.items():
                for t, (u1, u2), eta, lam in zip(run.times, run.positions, run.damping,
                                                 run.lambda_min):
                    w.writerow([label, repr(float(t)), repr(float(u1)), repr(float(u2)),
                                repr(float(eta)), repr(float(lam))])
    payload = {label: {"time_to_tol": run.time_to_tol if math.isfinite(run.time_to_tol) else None,
                       "converged": run.converged,
                       "final_position": run.positions[-1].tolist()}
               for label, run in runs.items()}
    print(json.dumps(payload, indent=2))
    ok = all(r.converged for r in runs.values())
    return EXIT_OK if ok else EXIT_NO_CONVERGENCE


def cmd_scaling(args):
    ks = list(range(args.k_min, args.k_max + 1, args.step))
    if len(ks) < 3:
        raise InputError("need at least 3 grids for a scaling fit")
    records, fit = bench.scaling_study(ks, method=args.method, tol=args.tol)
    payload = {"method": args.method,
               "records": [r.to_dict() for r in records],
               "exponent": fit.slope, "r_squared": fit.r_squared}
    if args.out:
        Path(args.out).write_text(analysis.records_to_csv(records))
    print(json.dumps(payload, indent=2))
    return EXIT_OK


def _read_pairs(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise InputError(str(exc))
    pairs = []
    for row in rows:
        if "h" in row and row["h"]:
            h = float(row["h"])
        elif "k" in row and row["k"]:
            h = mesh_size(int(row["k"]))
        else:
            raise InputError("CSV needs an 'h' or 'k' column")
        key = "E0" if "E0" in row else "E"
        if key not in row:
            raise InputError("CSV needs an 'E0' or 'E' column")
        pairs.append((h, float(row[key])))
    return pairs


def cmd_extrapolate(args):
    pairs = _read_pairs(args.input)
    fit = analysis.richardson_fit(pairs)
    payload = {"E_inf": fit.E_inf, "coefficient": fit.coefficient,
               "fit_residual": fit.residual, "points": len(pairs)}
    if len(pairs) >= 3:
        free = analysis.fit_convergence_order(pairs)
        payload["free_order"] = {"E_inf": free.E_inf, "order": free.order}
    print(json.dumps(payload, indent=2))
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="dfpm", description="Damped dynamical solvers for F(u) = 0.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("helium", help="s-limit Helium ground state on grid k")
    p.add_argument("--k", type=int, required=True, help="refinement index, h = 0.1/1.1^k")
    p.add_argument("--tol", type=float, default=1e-10, help="weighted residual tolerance")
    p.add_argument("--dt", type=_dt_arg, default=None,
                   help="time step, or 'auto' for the estimated stability bound "
                        "(default: tabulated step when known, else auto)")
    p.add_argument("--method", choices=("dfpm", "power"), default="dfpm")
    p.add_argument("--max-steps", type=int, default=50_000)
    p.add_argument("--out", help="JSON report path; the trace goes to <out>.trace.csv")
    p.set_defaults(func=cmd_helium)

    p = sub.add_parser("eigen", help="extreme eigenpairs of a symmetric Matrix Market matrix")
    p.add_argument("--matrix", required=True, help="symmetric Matrix Market file")
    p.add_argument("--num", type=int, default=1, help="number of eigenpairs")
    p.add_argument("--mode", choices=("min", "max"), default="min")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--dt", type=float, help="override the suggested time step")
    p.add_argument("--damping", type=float, help="override the suggested damping")
    p.add_argument("--max-steps", type=int, default=500_000)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eigen)

    p = sub.add_parser("oscillator", help="damped harmonic oscillator vs its exact solution")
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=2.0)
    p.add_argument("--stiffness", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--t-end", type=float, default=20.0)
    p.add_argument("--u0", type=float, default=1.0)
    p.add_argument("--v0", type=float, default=0.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_oscillator)

    p = sub.add_parser("damping-demo", help="constant vs curvature-adapted damping")
    p.add_argument("--out")
    p.set_defaults(func=cmd_damping_demo)

    p = sub.add_parser("scaling", help="iteration count vs problem size")
    p.add_argument("--k-min", type=int, default=4)
    p.add_argument("--k-max", type=int, default=10)
    p.add_argument("--step", type=int, default=2)
    p.add_argument("--method", choices=("dfpm", "power"), default="dfpm")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--out")
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("extrapolate", help="h^2 continuum extrapolation of a CSV of results")
    p.add_argument("--in", dest="input", required=True,
                   help="CSV with an h or k column and an E0 or E column")
    p.set_defaults(func=cmd_extrapolate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (InputError, DomainError) as exc:
        print(f"dfpm: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NoConvergenceError, DivergenceError, IntegrationError) as exc:
        print(f"dfpm: no convergence: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except DFPMError as exc:
        print(f"dfpm: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())

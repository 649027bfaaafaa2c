"""Curve fits and benchmark records."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, fields
from typing import Iterable, List, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DomainError


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r_squared: float


def linear_fit(x, y) -> FitResult:
    """Ordinary least-squares line with its coefficient of determination."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return FitResult(float(slope), float(intercept), float(min(max(r2, 0.0), 1.0)))


def fit_scaling_exponent(points: Iterable[Tuple[float, float]]) -> FitResult:
    """Fit ``iterations = C N^p`` on log-log axes; ``slope`` is ``p``."""
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or len(pts) < 3:
        raise DomainError("need at least 3 (N, iterations) points")
    if np.any(pts <= 0):
        raise DomainError("N and iteration counts must be positive")
    if len(np.unique(pts[:, 0])) != len(pts):
        raise DomainError("N values must be distinct")
    return linear_fit(np.log(pts[:, 0]), np.log(pts[:, 1]))


def fit_decay_rate(trace: Iterable[Tuple[float, float]]) -> FitResult:
    """Fit ``err = C exp(-gamma t)``; the decay rate is ``-slope``."""
    pts = np.asarray(list(trace), dtype=float)
    if pts.ndim != 2 or len(pts) < 10:
        raise DomainError("need at least 10 (t, err) points")
    if np.any(pts[:, 1] <= 0):
        raise DomainError("errors must be positive")
    return linear_fit(pts[:, 0], np.log(pts[:, 1]))


def envelope_peaks(t, x) -> List[Tuple[float, float]]:
    """Local maxima of ``|x|``: the envelope of an oscillating decay."""
    t = np.asarray(t, dtype=float)
    a = np.abs(np.asarray(x, dtype=float))
    idx = np.nonzero((a[1:-1] > a[:-2]) & (a[1:-1] >= a[2:]))[0] + 1
    return [(float(t[i]), float(a[i])) for i in idx]


def _check_pairs(pairs) -> np.ndarray:
    arr = np.asarray(list(pairs), dtype=float)
    if arr.ndim != 2 or len(arr) < 2:
        raise DomainError("need at least 2 (h, E) pairs")
    if len(np.unique(arr[:, 0])) != len(arr):
        raise DomainError("mesh sizes must be distinct")
    return arr


@dataclass(frozen=True)
class ExtrapolationFit:
    E_inf: float
    coefficient: float
    order: float
    residual: float


def richardson_fit(pairs: Sequence[Tuple[float, float]], order: float = 2.0) -> ExtrapolationFit:
    """Least-squares ``E(h) = E_inf + c h^order``; ``residual`` is the RMS misfit."""
    arr = _check_pairs(pairs)
    # sort so the result does not depend on the input order
    arr = arr[np.lexsort((arr[:, 1], arr[:, 0]))]
    h, E = arr[:, 0], arr[:, 1]
    X = np.column_stack([np.ones_like(h), h ** order])
    coef, *_ = np.linalg.lstsq(X, E, rcond=None)
    resid = E - X @ coef
    return ExtrapolationFit(float(coef[0]), float(coef[1]), float(order),
                            float(math.sqrt(np.mean(resid ** 2))))


def richardson_extrapolate(pairs: Sequence[Tuple[float, float]]) -> float:
    """Continuum value from an ``h^2`` least-squares fit."""
    return richardson_fit(pairs, 2.0).E_inf


def fit_convergence_order(pairs: Sequence[Tuple[float, float]],
                          bounds=(0.5, 6.0)) -> ExtrapolationFit:
    """``E(h) = E_inf + c h^p`` with the exponent free (needs 3+ pairs)."""
    arr = _check_pairs(pairs)
    if len(arr) < 3:
        raise DomainError("a free-exponent fit needs at least 3 pairs")
    h_ref = float(np.max(arr[:, 0]))

    def misfit(p):
        return richardson_fit([(h / h_ref, E) for h, E in arr], p).residual

    p = minimize_scalar(misfit, bounds=bounds, method="bounded",
                        options={"xatol": 1e-10}).x
    fit = richardson_fit(arr, p)
    return fit


@dataclass
class BenchmarkRecord:
    """One row of a Helium benchmark."""

    k: int
    N: int
    dt: float
    E0: float
    iterations: int
    wall_time_s: float
    method: str = "dfpm"
    converged: bool = True
    diagnostic: str = ""

    def format_E0(self) -> str:
        return f"{self.E0:.13g}"

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "BenchmarkRecord":
        conv = {"k": int, "N": int, "dt": float, "E0": float, "iterations": int,
                "wall_time_s": float, "method": str, "diagnostic": str}
        out = {}
        for f in fields(cls):
            if f.name not in d:
                continue
            val = d[f.name]
            if f.name == "converged":
                out[f.name] = val if isinstance(val, bool) else str(val).lower() == "true"
            else:
                out[f.name] = conv[f.name](val)
        return cls(**out)

    @classmethod
    def from_json(cls, text: str) -> "BenchmarkRecord":
        return cls.from_dict(json.loads(text))


CSV_FIELDS = [f.name for f in fields(BenchmarkRecord)]


def records_to_csv(records: Iterable[BenchmarkRecord]) -> str:
    buf = io.StringIO(newline="")
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS)
    writer.writeheader()
    for rec in records:
        row = rec.to_dict()
        # repr keeps every bit of the floats
        row.update({k: repr(row[k]) for k in ("dt", "E0", "wall_time_s")})
        writer.writerow(row)
    return buf.getvalue()


def records_from_csv(text: str) -> List[BenchmarkRecord]:
    return [BenchmarkRecord.from_dict(row) for row in csv.DictReader(io.StringIO(text, newline=""))]

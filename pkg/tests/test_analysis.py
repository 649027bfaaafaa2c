import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dfpm.analysis import (BenchmarkRecord, fit_convergence_order, fit_decay_rate,
                           fit_scaling_exponent, linear_fit, records_from_csv, records_to_csv,
                           richardson_extrapolate, richardson_fit)
from dfpm.bench import damping_demo, helium_ground_state, run_helium, write_trace
from dfpm.conservative import OscillatorParams, critical_damping, oscillator_analytic
from dfpm.errors import DomainError
from dfpm.helium import REFERENCE_TABLE, mesh_size


# --- richardson ---------------------------------------------------------------

def test_richardson_synthetic_exact():
    pairs = [(h, -2.879 + 3 * h * h) for h in (0.1, 0.07, 0.05, 0.02)]
    fit = richardson_fit(pairs)
    assert fit.E_inf == pytest.approx(-2.879, abs=1e-14)
    assert fit.coefficient == pytest.approx(3.0, rel=1e-10)
    assert fit.residual < 1e-14


def test_richardson_two_table_points():
    pairs = [(mesh_size(4), REFERENCE_TABLE[4][2]), (mesh_size(6), REFERENCE_TABLE[6][2])]
    # two-point elimination of the h^2 term, worked by hand
    h4, h6 = mesh_size(4), mesh_size(6)
    E4, E6 = REFERENCE_TABLE[4][2], REFERENCE_TABLE[6][2]
    oracle = (E6 * h4 ** 2 - E4 * h6 ** 2) / (h4 ** 2 - h6 ** 2)
    got = richardson_extrapolate(pairs)
    assert got == pytest.approx(oracle, abs=1e-13)
    assert got == pytest.approx(-2.87892, abs=1e-5)


def test_richardson_errors():
    with pytest.raises(DomainError):
        richardson_extrapolate([(0.1, -2.8)])
    with pytest.raises(DomainError):
        richardson_extrapolate([(0.1, -2.8), (0.1, -2.9)])


@given(st.permutations(list(range(6))))
@settings(max_examples=30)
def test_richardson_order_invariant(perm):
    ks = [4, 6, 8, 10, 12, 14]
    pairs = [(mesh_size(k), REFERENCE_TABLE[k][2]) for k in ks]
    shuffled = [pairs[i] for i in perm]
    assert richardson_extrapolate(shuffled) == richardson_extrapolate(pairs)


def test_free_order_fit_recovers_exponent():
    pairs = [(h, 1.5 - 0.7 * h ** 1.5) for h in (0.3, 0.2, 0.1, 0.05)]
    fit = fit_convergence_order(pairs)
    assert fit.order == pytest.approx(1.5, abs=1e-4)
    assert fit.E_inf == pytest.approx(1.5, abs=1e-6)
    with pytest.raises(DomainError):
        fit_convergence_order(pairs[:2])


def test_full_table_extrapolation_close_to_reference():
    pairs = [(mesh_size(k), v[2]) for k, v in REFERENCE_TABLE.items()]
    assert richardson_extrapolate(pairs) == pytest.approx(-2.8790287673, abs=5e-5)


# --- scaling and decay fits ---------------------------------------------------

def test_scaling_exponent_examples():
    N = np.array([100.0, 400.0, 1600.0, 6400.0])
    fit = fit_scaling_exponent(zip(N, 7 * N ** 0.5))
    assert fit.slope == pytest.approx(0.5, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit_scaling_exponent(zip(N, 3 * N)).slope == pytest.approx(1.0, abs=1e-12)


def test_scaling_exponent_errors():
    with pytest.raises(DomainError):
        fit_scaling_exponent([(1, 1), (2, 2)])
    with pytest.raises(DomainError):
        fit_scaling_exponent([(1, 1), (2, 0), (3, 3)])
    with pytest.raises(DomainError):
        fit_scaling_exponent([(1, 1), (1, 2), (3, 3)])


def test_decay_rate_examples():
    t = np.linspace(0, 5, 20)
    fit = fit_decay_rate(zip(t, np.exp(-2 * t)))
    assert -fit.slope == pytest.approx(2.0) and fit.r_squared == pytest.approx(1.0)
    assert -fit_decay_rate(zip(t, 5 * np.exp(-0.5 * t))).slope == pytest.approx(0.5)
    with pytest.raises(DomainError):
        fit_decay_rate(zip(t, np.zeros_like(t)))
    with pytest.raises(DomainError):
        fit_decay_rate(zip(t[:5], np.exp(-t[:5])))


def test_decay_rate_critical_trace():
    ec = critical_damping(1.0, 1.0)
    t = np.linspace(20, 60, 200)
    u, _ = oscillator_analytic(OscillatorParams(1.0, ec, 1.0, 1.0, 0.0), t)
    assert -fit_decay_rate(zip(t, np.abs(u))).slope == pytest.approx(ec / 2, rel=0.05)


@given(st.lists(st.floats(-100, 100), min_size=3, max_size=20))
def test_r_squared_in_unit_interval(ys):
    fit = linear_fit(np.arange(len(ys)), ys)
    assert 0.0 <= fit.r_squared <= 1.0


# --- records ------------------------------------------------------------------

RECORDS = [
    BenchmarkRecord(4, 23871, 0.066, -2.8638933216068887, 431, 1.234, "dfpm"),
    BenchmarkRecord(0, 11175, 0.0958, -2.85, 5154, 5.0, "power", True, ""),
    BenchmarkRecord(1, 13530, float("nan"), float("nan"), 0, 0.1, "dfpm", False, "boom, \"q\""),
]


def _same(a, b):
    for x, y in zip(a.to_dict().values(), b.to_dict().values()):
        if isinstance(x, float) and math.isnan(x):
            assert math.isnan(y)
        else:
            assert x == y


def test_record_json_round_trip():
    for rec in RECORDS:
        _same(BenchmarkRecord.from_json(rec.to_json()), rec)


def test_record_csv_round_trip():
    back = records_from_csv(records_to_csv(RECORDS))
    assert len(back) == len(RECORDS)
    for a, b in zip(back, RECORDS):
        _same(a, b)


@given(st.integers(0, 30), st.integers(1, 10 ** 7), st.floats(1e-4, 1.0),
       st.floats(-10, 10), st.integers(0, 10 ** 6), st.floats(0, 1e4),
       st.sampled_from(["dfpm", "power"]), st.booleans(), st.text(max_size=20))
def test_record_round_trip_property(k, N, dt, E0, it, wall, method, conv, diag):
    rec = BenchmarkRecord(k, N, dt, E0, it, wall, method, conv, diag)
    assert BenchmarkRecord.from_json(rec.to_json()) == rec
    assert records_from_csv(records_to_csv([rec])) == [rec]


def test_format_E0_has_13_significant_digits():
    assert RECORDS[0].format_E0() == "-2.863893321607"


# --- bench drivers ------------------------------------------------------------

def test_run_helium_reproducible():
    a = run_helium(0, tol=1e-8, dt="auto")
    b = run_helium(0, tol=1e-8, dt="auto")
    assert a.converged and a.E0 == b.E0 and a.iterations == b.iterations and a.dt == b.dt


def test_run_helium_error_becomes_failed_record():
    # a step far past the stability limit overflows the velocity
    rec = run_helium(0, tol=1e-10, dt=1e3, max_steps=1000)
    assert not rec.converged and "non-finite" in rec.diagnostic
    assert math.isnan(rec.E0) and rec.N == 11175 and rec.iterations > 0


def test_run_helium_no_convergence_record():
    rec = run_helium(0, tol=1e-10, dt="auto", max_steps=10)
    assert not rec.converged and "10 steps" in rec.diagnostic
    assert rec.iterations == 10 and math.isfinite(rec.E0)


def test_run_helium_validation():
    with pytest.raises(DomainError):
        run_helium(0, tol=0.0)
    with pytest.raises(DomainError):
        run_helium(0, method="lanczos")


def test_helium_trace_and_csv(tmp_path):
    run = helium_ground_state(0, tol=1e-6, dt="auto", trace=True)
    assert run.record.converged and len(run.trace) == run.record.iterations
    path = tmp_path / "trace.csv"
    write_trace(path, run.trace)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,residual,rayleigh,energy"
    assert len(lines) == len(run.trace) + 1
    last = [float(x) for x in lines[-1].split(",")]
    assert last[1] <= 1e-6
    assert last[2] == pytest.approx(run.record.E0, abs=1e-9)


# --- damping demo -------------------------------------------------------------

@pytest.fixture(scope="module")
def demo():
    return damping_demo()


def test_damping_demo_both_converge(demo):
    for run in demo.values():
        assert run.converged
        assert np.linalg.norm(run.positions[-1]) < 1e-6
        np.testing.assert_allclose(run.positions[0], [1.0, 1.0])


def test_damping_demo_adaptive_is_faster(demo):
    assert demo["adaptive"].time_to_tol <= demo["constant"].time_to_tol


def test_damping_demo_schedules(demo):
    np.testing.assert_array_equal(demo["constant"].damping, 1.0)
    ad = demo["adaptive"]
    np.testing.assert_allclose(ad.damping, 1.9 * np.sqrt(ad.lambda_min), rtol=1e-12)
    # near the origin the Hessian tends to diag(2, 4)
    assert ad.lambda_min[-1] == pytest.approx(2.0, rel=1e-3)
    assert demo["constant"].lambda_min[-1] == pytest.approx(2.0, rel=1e-3)

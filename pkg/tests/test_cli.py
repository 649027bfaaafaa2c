import json
import subprocess
import sys

import numpy as np
import pytest
from scipy.io import mmwrite

from dfpm.baselines import dense_eigen_oracle
from dfpm.cli import EXIT_INVALID, EXIT_NO_CONVERGENCE, EXIT_OK, main
from dfpm.helium import REFERENCE_TABLE, mesh_size


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


def test_helium_json_and_trace(capsys, tmp_path):
    out = tmp_path / "k0.json"
    code, payload = run(capsys, "helium", "--k", "0", "--tol", "1e-6", "--dt", "auto",
                        "--out", str(out))
    assert code == EXIT_OK
    for key in ("k", "N", "dt", "E0", "iterations", "wall_time_s", "residual_trace_path"):
        assert key in payload
    assert payload["N"] == 11175 and payload["converged"]
    assert json.loads(out.read_text()) == payload
    trace = open(payload["residual_trace_path"]).read().splitlines()
    assert trace[0] == "t,residual,rayleigh,energy"
    assert len(trace) == payload["iterations"] + 1


def test_helium_power_method(capsys):
    code, payload = run(capsys, "helium", "--k", "0", "--tol", "1e-6", "--method", "power")
    assert code == EXIT_OK and payload["method"] == "power"
    assert payload["residual_trace_path"] is None


def test_helium_no_convergence_exit_code(capsys):
    code, payload = run(capsys, "helium", "--k", "0", "--dt", "auto", "--max-steps", "5")
    assert code == EXIT_NO_CONVERGENCE and not payload["converged"]


@pytest.mark.parametrize("argv", [
    ["helium"],
    ["helium", "--k", "0", "--dt", "-1"],
    ["helium", "--k", "0", "--dt", "fast"],
    ["helium", "--k", "0", "--method", "lanczos"],
    ["helium", "--k", "-2"],
    ["helium", "--k", "0", "--tol", "0"],
    ["bogus"],
])
def test_invalid_input_exit_code(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        code = main(argv)
        raise SystemExit(code)
    assert exc.value.code == EXIT_INVALID


def _write_matrix(path, A):
    mmwrite(str(path), A, symmetry="symmetric" if np.allclose(A, A.T) else "general")
    return str(path)


def test_eigen_matches_oracle(capsys, tmp_path):
    rng = np.random.default_rng(7)
    B = rng.standard_normal((12, 12))
    A = 0.5 * (B + B.T)
    path = _write_matrix(tmp_path / "a.mtx", A)
    code, payload = run(capsys, "eigen", "--matrix", path, "--num", "3", "--tol", "1e-9")
    assert code == EXIT_OK and payload["converged"]
    vals = dense_eigen_oracle(A)[0]
    np.testing.assert_allclose(payload["eigenvalues"], vals[:3], atol=1e-8)
    code, payload = run(capsys, "eigen", "--matrix", path, "--num", "2", "--mode", "max",
                        "--tol", "1e-9")
    np.testing.assert_allclose(payload["eigenvalues"], vals[::-1][:2], atol=1e-8)


def test_eigen_sparse_coordinate_input(capsys, tmp_path):
    from scipy.sparse import diags
    n = 30
    T = diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1])
    path = str(tmp_path / "t.mtx")
    mmwrite(path, T.tocoo(), symmetry="symmetric")
    code, payload = run(capsys, "eigen", "--matrix", path, "--tol", "1e-9")
    exact = 2 - 2 * np.cos(np.pi / (n + 1))
    assert code == EXIT_OK
    assert payload["eigenvalues"][0] == pytest.approx(exact, abs=1e-8)


def test_eigen_overrides_and_no_convergence(capsys, tmp_path):
    path = _write_matrix(tmp_path / "d.mtx", np.diag([1.0, 2.0, 3.0]))
    code, payload = run(capsys, "eigen", "--matrix", path, "--dt", "0.1", "--damping", "1.0")
    assert code == EXIT_OK and payload["dt"] == 0.1
    code, payload = run(capsys, "eigen", "--matrix", path, "--max-steps", "3")
    assert code == EXIT_NO_CONVERGENCE


def test_eigen_invalid_inputs(capsys, tmp_path):
    bad = _write_matrix(tmp_path / "ns.mtx", np.array([[1.0, 2.0], [0.0, 1.0]]))
    assert main(["eigen", "--matrix", bad]) == EXIT_INVALID
    assert main(["eigen", "--matrix", str(tmp_path / "missing.mtx")]) == EXIT_INVALID
    ok = _write_matrix(tmp_path / "ok.mtx", np.eye(3) + 0.1)
    assert main(["eigen", "--matrix", ok, "--num", "4"]) == EXIT_INVALID
    garbage = tmp_path / "g.mtx"
    garbage.write_text("not a matrix\n")
    assert main(["eigen", "--matrix", str(garbage)]) == EXIT_INVALID


def test_oscillator(capsys, tmp_path):
    out = tmp_path / "osc.csv"
    code, payload = run(capsys, "oscillator", "--eta", "2", "--dt", "0.01", "--t-end", "20",
                        "--out", str(out))
    assert code == EXIT_OK
    assert payload["critical_damping"] == 2.0
    assert payload["max_error"] <= 0.01
    assert payload["time_to_1e-6"] == pytest.approx(16.69, abs=0.5)
    lines = out.read_text().splitlines()
    assert lines[0] == "t,u,v,u_exact,v_exact,energy" and len(lines) == 2002


def test_damping_demo_cli(capsys, tmp_path):
    out = tmp_path / "demo.csv"
    code, payload = run(capsys, "damping-demo", "--out", str(out))
    assert code == EXIT_OK
    assert payload["adaptive"]["time_to_tol"] <= payload["constant"]["time_to_tol"]
    header = out.read_text().splitlines()[0]
    assert header == "run,t,u1,u2,eta,lambda_min"


def test_scaling_cli(capsys, tmp_path):
    out = tmp_path / "scaling.csv"
    code, payload = run(capsys, "scaling", "--k-min", "0", "--k-max", "2", "--step", "1",
                        "--tol", "1e-6", "--out", str(out))
    assert code == EXIT_OK
    assert len(payload["records"]) == 3 and 0.0 < payload["exponent"] < 1.5
    assert out.read_text().startswith("k,N,dt,E0")
    with pytest.raises(SystemExit):
        raise SystemExit(main(["scaling", "--k-min", "0", "--k-max", "1"]))


def test_extrapolate_cli(capsys, tmp_path):
    by_k = tmp_path / "k.csv"
    by_k.write_text("k,E0\n" + "".join(f"{k},{REFERENCE_TABLE[k][2]!r}\n" for k in (4, 6, 8, 10)))
    code, payload = run(capsys, "extrapolate", "--in", str(by_k))
    assert code == EXIT_OK
    assert payload["E_inf"] == pytest.approx(-2.8790287673, abs=5e-4)
    assert abs(payload["free_order"]["order"] - 2) < 0.15
    by_h = tmp_path / "h.csv"
    by_h.write_text("h,E\n" + "".join(f"{h!r},{-2.879 + 3 * h * h!r}\n"
                                      for h in (0.1, mesh_size(3))))
    code, payload = run(capsys, "extrapolate", "--in", str(by_h))
    assert payload["E_inf"] == pytest.approx(-2.879, abs=1e-12)
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n1,2\n3,4\n")
    assert main(["extrapolate", "--in", str(bad)]) == EXIT_INVALID
    assert main(["extrapolate", "--in", str(tmp_path / "none.csv")]) == EXIT_INVALID


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "dfpm", "extrapolate", "--in", "/nonexistent"],
                          capture_output=True, text=True)
    assert proc.returncode == EXIT_INVALID
    assert "invalid input" in proc.stderr

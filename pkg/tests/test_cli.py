import json
import subprocess
import sys

import numpy as np
import pytest

from krylovgrad.cli import main, run_checks
from krylovgrad.ingest import Fcidump, read_fcidump

from oracles import DATA

H2 = str(DATA / "h2_2o.fcidump")
H2_D = str(DATA / "h2_2o.derivs")
H2O = str(DATA / "h2o_4o.fcidump")
H2O_D = str(DATA / "h2o_4o.derivs")


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _energy_table(out):
    lines = out.splitlines()
    start = lines.index("D,s,rank,E0,delta,measurements")
    return [row.split(",") for row in lines[start + 1:]]


def test_check_passes(capsys):
    code, out, _ = _run(capsys, "check")
    assert code == 0
    assert out.count("PASS") == len(run_checks()) and "FAIL" not in out


def test_missing_file_names_path(capsys, tmp_path):
    missing = tmp_path / "nope.fcidump"
    code, _, err = _run(capsys, "energy", "--fcidump", str(missing))
    assert code == 2 and str(missing) in err


def test_required_input_and_parse_errors(capsys, tmp_path):
    assert _run(capsys, "energy")[0] == 2
    bad = tmp_path / "bad.fcidump"
    bad.write_text("&FCI NORB=1,\n&END\nx 1 1 0 0\n")
    assert _run(capsys, "energy", "--fcidump", str(bad))[0] == 2
    assert _run(capsys, "gradient", "--fcidump", H2)[0] == 2
    assert _run(capsys, "energy", "--fcidump", H2, "--dim", "0")[0] == 2


def test_energy_exact_limit(capsys):
    code, out, _ = _run(capsys, "energy", "--fcidump", H2, "--dim", "4", "--threshold", "0")
    assert code == 0
    row = _energy_table(out)[0]
    assert float(row[4]) <= 1e-9
    assert "distinct_measurements 7" in out


def test_energy_sweep_is_nonincreasing(capsys):
    code, out, _ = _run(capsys, "energy", "--fcidump", H2, "--sweep-dim", "1,2,3,4,5,6,7,8,9,10",
                        "--threshold", "1e-3")
    assert code == 0
    e0 = [float(r[3]) for r in _energy_table(out)]
    assert len(e0) == 10
    assert all(b <= a + 1e-12 for a, b in zip(e0, e0[1:]))


def test_empty_subspace_exit_code(capsys):
    assert _run(capsys, "energy", "--fcidump", H2, "--threshold", "10")[0] == 3


def test_unretained_state_exit_code(capsys):
    code = _run(capsys, "gradient", "--fcidump", H2, "--derivs", H2_D, "--dim", "4", "--threshold", "0",
                "--state", "3", "--estimator", "exact")[0]
    assert code == 3


def _theta_family(tmp_path, theta):
    base = read_fcidump(DATA / "h2_2o.fcidump")
    dh = np.array([[0.3, -0.2], [-0.2, 0.1]])
    dg = np.zeros((2,) * 4)
    dg[0, 0, 1, 1] = dg[1, 1, 0, 0] = 0.05
    d = Fcidump(2, 2, 0, base.h + theta * dh, base.g + theta * dg, base.e_core + 0.4 * theta)
    path = tmp_path / f"theta_{theta:+.0e}.fcidump"
    path.write_text(d.dumps())
    return str(path)


def test_gradient_exact_matches_finite_difference(capsys, tmp_path):
    # K records are derivatives of k = h - 1/2 sum_r g_prrq; the perturbed g_0011 never
    # enters that sum, so dk equals dh here
    derivs = tmp_path / "theta.derivs"
    derivs.write_text("norb 2\ncoord theta\nK 0 0 0.3\nK 0 1 -0.2\nK 1 1 0.1\n"
                      "G 0 0 1 1 0.05\nE 0.4\n")
    code, out, _ = _run(capsys, "gradient", "--fcidump", _theta_family(tmp_path, 0.0),
                        "--derivs", str(derivs), "--dim", "2", "--threshold", "0", "--estimator", "exact")
    assert code == 0
    g = json.loads(out)["values"][0]
    h = 1e-4
    energies = []
    for t in (h, -h):
        _, out, _ = _run(capsys, "energy", "--fcidump", _theta_family(tmp_path, t), "--dim", "2",
                         "--threshold", "0")
        energies.append(float(_energy_table(out)[0][3]))
    assert g == pytest.approx((energies[0] - energies[1]) / (2 * h), abs=1e-6)


def test_gradient_estimators_agree_and_report_variance(capsys):
    results = {}
    for est in ("exact", "coherent", "post", "direct"):
        code, out, _ = _run(capsys, "gradient", "--fcidump", H2, "--derivs", H2_D, "--dim", "2",
                            "--threshold", "0", "--estimator", est, "--shots", "analytic")
        assert code == 0
        results[est] = json.loads(out)
    ref = results["exact"]["values"][0]
    for est in ("coherent", "post", "direct"):
        assert results[est]["values"][0] == pytest.approx(ref, abs=1e-9)
    assert results["coherent"]["variance"][0] > 0
    assert results["post"]["variance"][0] > 0
    assert results["exact"]["variance"] == [0.0]
    for key in ("eta", "p_success", "method", "labels"):
        assert key in results["coherent"]


def test_zero_derivative_file(capsys, tmp_path):
    zero = tmp_path / "zero.derivs"
    zero.write_text("norb 2\ncoord a\nE 0.0\ncoord b\nK 0 0 0.0\n")
    code, out, _ = _run(capsys, "gradient", "--fcidump", H2, "--derivs", str(zero), "--dim", "2",
                        "--estimator", "coherent")
    assert code == 0
    assert json.loads(out)["values"] == [0.0, 0.0]


def test_sampled_gradient_with_single_realization(capsys):
    code, out, _ = _run(capsys, "gradient", "--fcidump", H2, "--derivs", H2_D, "--dim", "2",
                        "--estimator", "post", "--shots", "100", "--ensemble", "1")
    assert code == 0
    assert json.loads(out)["variance"] == [0.0]


def test_low_success_exit_code(capsys):
    code, _, err = _run(capsys, "gradient", "--fcidump", H2, "--derivs", H2_D, "--dim", "2",
                        "--estimator", "post", "--p-floor", "1.0")
    assert code == 4 and "success probability" in err


def test_bench_is_byte_identical(capsys, tmp_path):
    outs = []
    for k in range(2):
        path = tmp_path / f"bench{k}.csv"
        code = _run(capsys, "bench-variance", "--fcidump", H2, "--derivs", H2_D, "--sweep-dim", "1,2",
                    "--threshold", "1e-3", "--ensemble", "20", "--seed", "5", "--out", str(path))[0]
        assert code == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
    lines = outs[0].decode().splitlines()
    assert lines[0] == "D,s,estimator,total_variance,eta,delta,p_success"
    assert len(lines) == 5


def test_bench_single_realization_has_zero_variance(capsys):
    code, out, _ = _run(capsys, "bench-variance", "--fcidump", H2, "--derivs", H2_D, "--sweep-dim", "1,2",
                        "--ensemble", "1")
    assert code == 0
    rows = [r.split(",") for r in out.splitlines()[1:]]
    assert rows and all(float(r[3]) == 0.0 for r in rows)


def test_bench_eta_grows_as_threshold_shrinks(capsys):
    code, out, _ = _run(capsys, "bench-variance", "--fcidump", H2O, "--derivs", H2O_D, "--sweep-dim", "2,3",
                        "--sweep-threshold", "1e-2,1e-3,1e-8", "--ensemble", "2", "--estimator", "coherent")
    assert code == 0
    eta = {}
    for r in out.splitlines()[1:]:
        D, s, _, _, e, _, _ = r.split(",")
        eta[(int(D), float(s))] = float(e)
    for D in (2, 3):
        assert eta[(D, 1e-2)] <= eta[(D, 1e-3)] <= eta[(D, 1e-8)]
        assert eta[(D, 1e-8)] > eta[(D, 1e-2)]


def test_config_file_with_flag_override(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("dim = 1\nthreshold = 0\n")
    _, out, _ = _run(capsys, "energy", "--fcidump", H2, "--config", str(cfg))
    assert "D 1 s 0 rank 1" in out
    _, out, _ = _run(capsys, "energy", "--fcidump", H2, "--config", str(cfg), "--dim", "2")
    assert "D 2 s 0 rank 2" in out


def test_qsp_phases_and_cache(capsys, tmp_path):
    code, out, _ = _run(capsys, "qsp-phases", "--fcidump", H2, "--dim", "3", "--threshold", "0")
    assert code == 0
    data = json.loads(out)
    assert data["parts"] and all(p["residual"] <= 1e-10 for p in data["parts"])
    cache = tmp_path / "phases.json"
    args = ("gradient", "--fcidump", H2, "--derivs", H2_D, "--dim", "2", "--estimator", "coherent",
            "--phase-cache", str(cache))
    first = _run(capsys, *args)[1]
    assert cache.exists() and json.loads(cache.read_text())
    assert _run(capsys, *args)[1] == first


def test_output_file_and_module_entry_point(tmp_path):
    out = tmp_path / "e.txt"
    proc = subprocess.run([sys.executable, "-m", "krylovgrad", "energy", "--fcidump", H2, "--dim", "2",
                           "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "exact_sector_energy" in out.read_text()

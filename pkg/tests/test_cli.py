import subprocess
import sys

import numpy as np
import pytest

from strucvar.cli import main
from strucvar.dataio import load_csv, read_matrix_csv


@pytest.fixture
def sim_dir(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--seed", "3", "--out-dir", str(out), "--p", "4", "--T", "300", "--s", "2"]) == 0
    return out


def run(capsys, *argv):
    code = main(list(argv))
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def kv(text):
    return dict(line.split(" = ", 1) for line in text.strip().splitlines() if " = " in line)


def test_simulate_outputs(sim_dir):
    traj = (sim_dir / "trajectory.csv").read_text().splitlines()
    assert traj[0] == "t,x1,x2,x3,x4" and len(traj) == 302
    assert (sim_dir / "truth.csv").read_text().splitlines()[0] == "y1,y2,y3,y4"
    assert read_matrix_csv(sim_dir / "truth.csv").shape == (4, 4)


def test_simulate_is_reproducible(tmp_path, sim_dir):
    again = tmp_path / "again"
    main(["simulate", "--seed", "3", "--out-dir", str(again), "--p", "4", "--T", "300", "--s", "2"])
    for name in ("trajectory.csv", "truth.csv"):
        assert (again / name).read_bytes() == (sim_dir / name).read_bytes()


def test_spectral(capsys, sim_dir, tmp_path):
    code, out, _ = run(capsys, "spectral", "--coeffs", str(sim_dir / "truth.csv"), "--out-dir", str(tmp_path))
    vals = kv(out)
    assert code == 0
    assert float(vals["radius"]) == pytest.approx(0.9, abs=1e-6)
    assert float(vals["min_eig_Cx"]) >= float(vals["script_L"]) * (1 - 1e-8)


def test_fit_lambda_and_cv(capsys, sim_dir, tmp_path):
    data = str(sim_dir / "trajectory.csv")
    code, out, _ = run(capsys, "fit", "--data", data, "--lambda", "0.05", "--out-dir", str(tmp_path))
    assert code == 0 and float(kv(out)["lambda"]) == 0.05
    diag = (tmp_path / "diagnostics.csv").read_text().splitlines()
    assert diag[0] == "row,iters,objective,residual,converged" and len(diag) == 5
    assert read_matrix_csv(tmp_path / "b_hat.csv").shape == (4, 4)
    code, out, _ = run(capsys, "fit", "--data", data, "--cv", "--penalty", "gl", "--groups", "2,2",
                       "--out-dir", str(tmp_path))
    assert code == 0 and 0 < float(kv(out)["lambda_rel"]) <= 1


def test_cv(capsys, sim_dir, tmp_path):
    code, out, _ = run(capsys, "cv", "--data", str(sim_dir / "trajectory.csv"), "--grid-size", "8",
                       "--folds", "4", "--out-dir", str(tmp_path))
    assert code == 0
    cv = load_csv(tmp_path / "cv.csv")
    assert cv.names == ["lambda", "lambda_rel", "cv_mse"] and cv.values.shape == (8, 3)
    assert float(kv(out)["best_lambda"]) in cv.values[:, 0]


def test_theory(capsys, sim_dir, tmp_path):
    code, out, _ = run(capsys, "theory", "--coeffs", str(sim_dir / "truth.csv"), "--n", "200",
                       "--width-samples", "500", "--out-dir", str(tmp_path))
    assert code == 0
    vals = kv(out)
    assert list(vals) == ["width_mean", "width_stderr", "rate", "n_min", "kappa_hat", "det_bound"]
    assert int(vals["n_min"]) >= 1 and float(vals["kappa_hat"]) >= 0


def test_scaling(capsys, tmp_path):
    cfg = tmp_path / "scaling.cfg"
    cfg.write_text("[scaling]\np_list = [6, 8, 10]\nn_list = [40, 80, 160]\nruns = 2\ngrid_size = 10\n"
                   "burn_in = 100\n")
    out_dir = tmp_path / "out"
    code, out, _ = run(capsys, "--config", str(cfg), "scaling", "--out-dir", str(out_dir),
                       "--svg", str(tmp_path / "fig.svg"))
    assert code == 0
    head = (out_dir / "records.csv").read_text().splitlines()
    assert head[0] == "kind,p,d,N,s,s_g,K,m,lambda,lambda_rel,err_mean,err_std,is_best"
    assert len(head) == 1 + 3 * 3 * 10
    assert (out_dir / "alignment.csv").read_text().splitlines()[0] == "rescaled_x,curve_p,err"
    assert "max_pairwise_dev" in kv(out)
    for name in ("fig_raw.svg", "fig_rescaled.svg"):
        assert (tmp_path / name).read_text().count("<polyline") == 3


def test_eval_real(capsys, sim_dir, tmp_path):
    code, out, _ = run(capsys, "eval-real", "--data", str(sim_dir / "trajectory.csv"), "--grid-size", "10",
                       "--out-dir", str(tmp_path))
    assert code == 0
    ev = (tmp_path / "eval.csv").read_text().splitlines()
    assert ev[0] == "penalty,lambda,mse,sparsity_percent,n_train,n_test"
    assert [r.split(",")[0] for r in ev[1:]] == ["L1", "RidgeSq"]
    assert (tmp_path / "b_hat_L1.csv").exists() and (tmp_path / "b_hat_RidgeSq.csv").exists()


class TestExitCodes:
    def test_config_errors(self, capsys, tmp_path, sim_dir):
        bad = tmp_path / "bad.cfg"
        bad.write_text("nonsense.key = 1\n")
        assert run(capsys, "--config", str(bad), "simulate", "--out-dir", str(tmp_path))[0] == 2
        assert run(capsys, "simulate", "--threads", "0", "--out-dir", str(tmp_path))[0] == 2
        assert run(capsys, "fit", "--data", str(sim_dir / "trajectory.csv"), "--lambda", "0.1",
                   "--penalty", "gl", "--out-dir", str(tmp_path))[0] == 2
        assert run(capsys, "frobnicate")[0] == 2
        assert run(capsys, "--config", str(tmp_path / "missing.cfg"), "simulate")[0] == 2

    def test_data_errors(self, capsys, tmp_path):
        ragged = tmp_path / "r.csv"
        ragged.write_text("a,b\n1,2\n3\n")
        code, _, err = run(capsys, "fit", "--data", str(ragged), "--lambda", "0.1", "--out-dir", str(tmp_path))
        assert code == 3 and "r.csv:3" in err
        unstable = tmp_path / "u.csv"
        unstable.write_text("y1\n1.5\n")
        assert run(capsys, "spectral", "--coeffs", str(unstable), "--out-dir", str(tmp_path))[0] == 3

    @pytest.mark.filterwarnings("ignore:overflow")
    def test_numerical_failure(self, capsys, tmp_path):
        huge = tmp_path / "h.csv"
        huge.write_text("a,b\n" + "\n".join(f"{1e300 * (i % 3 - 1)},{1e300 * (i % 2)}" for i in range(30)))
        code, _, err = run(capsys, "fit", "--data", str(huge), "--lambda", "0.1", "--out-dir", str(tmp_path))
        assert code == 4 and "numerical failure" in err


def test_help_lists_headers(capsys):
    assert main(["--help"]) == 0
    text = capsys.readouterr().out
    for sub in ("simulate", "spectral", "fit", "cv", "theory", "scaling", "eval-real"):
        assert sub in text
    assert "records.csv: kind,p,d,N" in text and "exit" in text.lower()


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "strucvar.cli", "simulate", "--p", "2", "--T", "10",
                           "--s", "1", "--out-dir", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert np.isfinite(load_csv(tmp_path / "trajectory.csv").values).all()

import json
import subprocess
import sys

import numpy as np
import pandas as pd
import pytest

from cudl.cli import main

FAST_CONFIG = """
[cudl]
eta_grid = [0.0, 0.01]
[network]
epochs = 10
[forest]
n_estimators = 5
"""


@pytest.fixture
def data_csv(tmp_path):
    path = tmp_path / "data.csv"
    assert main(["simulate", "--setting", "1", "--n", "150", "--seed", "7", "--t", "0.67",
                 "--tau", "1.0", "--out", str(path)]) == 0
    return path


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "cfg.toml"
    path.write_text(FAST_CONFIG)
    return path


def test_simulate_is_byte_identical(capsys):
    assert main(["simulate", "--setting", "1", "--n", "100", "--seed", "7"]) == 0
    first = capsys.readouterr().out
    assert main(["simulate", "--setting", "1", "--n", "100", "--seed", "7"]) == 0
    assert capsys.readouterr().out == first
    assert first.splitlines()[0].startswith("time,event,w1,")
    assert len(first.splitlines()) == 101


def test_unknown_method_is_usage_error(data_csv, tmp_path):
    out = tmp_path / "m.json"
    code = main(["fit", "--in", str(data_csv), "--method", "svm", "--target", "brier:1",
                 "--seed", "1", "--out", str(out)])
    assert code == 2 and not out.exists()


def test_missing_seed_is_usage_error(data_csv, tmp_path):
    assert main(["fit", "--in", str(data_csv), "--method", "cox", "--target", "brier:1",
                 "--out", str(tmp_path / "m.json")]) == 2
    assert main(["simulate", "--setting", "1", "--n", "5"]) == 2


def test_round_trip_cudl_dr(data_csv, config, tmp_path, capsys):
    model, preds = tmp_path / "m.json", tmp_path / "p.csv"
    assert main(["fit", "--in", str(data_csv), "--method", "cudl-dr", "--target", "brier:0.67",
                 "--config", str(config), "--seed", "3", "--out", str(model)]) == 0
    doc = json.loads(model.read_text())
    assert doc["method"] == "cudl-dr" and doc["model"]["spec"]["network"]["epochs"] == 10
    assert main(["predict", "--model", str(model), "--in", str(data_csv), "--out", str(preds)]) == 0
    p = pd.read_csv(preds)["prediction"].to_numpy()
    assert p.size == 150 and np.all((p > 0) & (p < 1))
    capsys.readouterr()
    assert main(["evaluate", "mse", "--pred", str(preds), "--truth", str(data_csv)]) == 0
    assert np.isfinite(json.loads(capsys.readouterr().out)["mse"])


@pytest.mark.parametrize("method", ["cox", "rsf", "cudl-bj"])
def test_fit_predict_rms(method, data_csv, config, tmp_path, capsys):
    model = tmp_path / "m.json"
    assert main(["fit", "--in", str(data_csv), "--method", method, "--target", "rms:1.0",
                 "--config", str(config), "--seed", "3", "--out", str(model)]) == 0
    capsys.readouterr()
    assert main(["--quiet", "predict", "--model", str(model), "--in", str(data_csv)]) == 0
    p = np.array(capsys.readouterr().out.split()[1:], dtype=float)
    assert p.size == 150 and np.all(p >= 0)


def test_transform_output(data_csv, config, tmp_path):
    out = tmp_path / "pseudo.csv"
    assert main(["transform", "--in", str(data_csv), "--variant", "bj", "--target", "rms:1.0",
                 "--config", str(config), "--seed", "1", "--out", str(out)]) == 0
    df = pd.read_csv(out)
    assert list(df.columns[:2]) == ["d", "z1"] and df.shape == (150, 31)
    assert np.allclose(df.iloc[:, 1:].mean(), 0, atol=1e-12)


def test_data_error_names_row(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("time,event,w1\n1.0,1,0.5\n2.0,0,oops\n")
    code = main(["fit", "--in", str(bad), "--method", "cox", "--target", "brier:1",
                 "--seed", "1", "--out", str(tmp_path / "m.json")])
    assert code == 3
    assert "row 2" in capsys.readouterr().err
    assert not (tmp_path / "m.json").exists()


def test_numerical_failure_exit_code(tmp_path):
    sep = tmp_path / "sep.csv"
    rows = "\n".join(f"{i},1,{(7 - i) / 10}" for i in range(1, 7))
    sep.write_text("time,event,w1\n" + rows + "\n")
    out = tmp_path / "m.json"
    assert main(["fit", "--in", str(sep), "--method", "cox", "--target", "rms:3",
                 "--seed", "1", "--out", str(out)]) == 4
    assert not out.exists()


def test_bad_config_is_usage_error(data_csv, tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("[network]\nlayers = 3\n")
    assert main(["fit", "--in", str(data_csv), "--method", "cudl-bj", "--target", "brier:0.6",
                 "--config", str(cfg), "--seed", "1", "--out", str(tmp_path / "m.json")]) == 2


def test_evaluate_brier_cv(data_csv, tmp_path):
    out = tmp_path / "cv.csv"
    assert main(["evaluate", "brier-cv", "--in", str(data_csv), "--method", "cox", "--t", "0.67",
                 "--splits", "2", "--seed", "4", "--out", str(out)]) == 0
    df = pd.read_csv(out)
    assert list(df.columns) == ["split", "brier"] and len(df) == 2


def test_benchmark_and_plotdata(tmp_path, capsys):
    grid = tmp_path / "grid.toml"
    grid.write_text('settings = [1]\nmethods = ["cox", "cudl-bj"]\ntargets = ["brier"]\n'
                    'n = [100]\nreplications = 2\nn_test = 40\nn_mc = 2000\n'
                    '[cudl]\neta_grid = [0.0]\n[cudl.network]\nepochs = 3\n'
                    '[forest]\nn_estimators = 3\n')
    res, summ, plot = tmp_path / "r.csv", tmp_path / "s.csv", tmp_path / "plot.csv"
    assert main(["benchmark", "--grid", str(grid), "--seed", "1", "--out", str(res),
                 "--summary", str(summ)]) == 0
    err = capsys.readouterr().err
    assert "cell=" in err and "status=ok" in err
    df = pd.read_csv(res)
    assert len(df) == 4 and (df["status"] == "ok").all()
    assert set(pd.read_csv(summ).columns) >= {"mean", "median", "q1", "q3"}
    assert main(["plotdata", "--in", str(res), "--out", str(plot)]) == 0
    assert set(pd.read_csv(plot)["statistic"]) == {"q1", "median", "q3", "mean"}


def test_benchmark_requires_seed(tmp_path):
    grid = tmp_path / "grid.toml"
    grid.write_text("replications = 0\n")
    assert main(["benchmark", "--grid", str(grid), "--out", str(tmp_path / "r.csv")]) == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "cudl", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "cudl" in proc.stdout

import re

import numpy as np
import pytest
from click.testing import CliRunner

from hnnso import cli
from hnnso.evaluation import read_report_csv
from hnnso.model import load_model
from hnnso.train import DivergenceError

FAST = ["--set", "epochs_stage1=3", "--set", "epochs_stage2=3", "--set", "epochs_stage3=3",
        "--set", "epochs_finetune=8", "--set", "epochs_mlp=10", "--set", "h_x1=2", "--set", "h_x2=2",
        "--set", "h_e=3"]


@pytest.fixture
def runner(monkeypatch):
    monkeypatch.delenv("HNNSO_SEED", raising=False)
    return CliRunner()


@pytest.fixture
def synth_csv(runner, tmp_path):
    res = runner.invoke(cli.main, ["synth", "--out", str(tmp_path / "s"), "--set", "synth_d=200"])
    assert res.exit_code == 0, res.output
    return tmp_path / "s" / "synth.csv"


def train(runner, data, out, *extra):
    return runner.invoke(cli.main, ["train", "--data", str(data), "--out", str(out),
                                    "--set", "n_in=10", *FAST, *extra])


@pytest.mark.parametrize("cmd", [[], ["train"], ["eval"], ["predict"], ["gradcheck"], ["synth"], ["crossval"]])
def test_help(runner, cmd):
    res = runner.invoke(cli.main, cmd + ["--help"])
    assert res.exit_code == 0 and "Usage" in res.output


def test_missing_dataset_exit_2(runner, tmp_path):
    res = runner.invoke(cli.main, ["train", "--data", str(tmp_path / "nope.csv"), "--set", "n_in=3",
                                   "--out", str(tmp_path / "o")])
    assert res.exit_code == 2
    res = runner.invoke(cli.main, ["train", "--out", str(tmp_path / "o")])
    assert res.exit_code == 2


def test_bad_config_exit_2(runner, synth_csv, tmp_path):
    res = train(runner, synth_csv, tmp_path / "o", "--set", "no_such_key=1")
    assert res.exit_code == 2 and "no_such_key" in res.output
    res = train(runner, synth_csv, tmp_path / "o", "--set", "broken")
    assert res.exit_code == 2


def test_corrupt_checkpoint_exit_4(runner, synth_csv, tmp_path):
    assert train(runner, synth_csv, tmp_path / "t").exit_code == 0
    raw = (tmp_path / "t" / "checkpoint.bin").read_bytes()
    bad = tmp_path / "bad.bin"
    bad.write_bytes(raw[: len(raw) // 2])
    res = runner.invoke(cli.main, ["eval", "--checkpoint", str(bad), "--data", str(synth_csv),
                                   "--out", str(tmp_path / "e")])
    assert res.exit_code == 4
    bad.write_bytes(b"garbage")
    res = runner.invoke(cli.main, ["predict", "--checkpoint", str(bad), "--data", str(synth_csv),
                                   "--out", str(tmp_path / "e")])
    assert res.exit_code == 4
    res = runner.invoke(cli.main, ["eval", "--checkpoint", str(tmp_path / "absent.bin"),
                                   "--data", str(synth_csv), "--out", str(tmp_path / "e")])
    assert res.exit_code == 4


def test_divergence_exit_3(runner, synth_csv, tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise DivergenceError("finetune: non-finite loss at epoch 1")
    monkeypatch.setattr(cli, "fit_model", boom)
    assert train(runner, synth_csv, tmp_path / "o").exit_code == 3


def test_gradcheck(runner, monkeypatch):
    res = runner.invoke(cli.main, ["gradcheck"])
    assert res.exit_code == 0, res.output
    worst = float(re.search(r"overall max rel. err (\S+)", res.output).group(1))
    assert worst < 1e-5
    monkeypatch.setattr(cli.gc, "CHECKS", {"broken": lambda seed: 0.5})
    assert runner.invoke(cli.main, ["gradcheck", "--seeds", "1"]).exit_code == 5


def test_train_outputs_and_reload(runner, synth_csv, tmp_path):
    out = tmp_path / "t"
    res = train(runner, synth_csv, out)
    assert res.exit_code == 0, res.output
    for name in ("checkpoint.bin", "train.log", "validation.csv", "effective-config.txt"):
        assert (out / name).exists()
    model = load_model(out / "checkpoint.bin")
    assert model.config.n_in == 10 and model.config.h_e == 3
    assert "h_e=3" in (out / "effective-config.txt").read_text()


def test_train_is_byte_deterministic(runner, synth_csv, tmp_path):
    for d in ("a", "b"):
        assert train(runner, synth_csv, tmp_path / d).exit_code == 0
    for name in ("checkpoint.bin", "train.log", "validation.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert train(runner, synth_csv, tmp_path / "c", "--seed", "4").exit_code == 0
    assert (tmp_path / "c" / "checkpoint.bin").read_bytes() != (tmp_path / "a" / "checkpoint.bin").read_bytes()


def test_env_seed(runner, synth_csv, tmp_path, monkeypatch):
    monkeypatch.setenv("HNNSO_SEED", "4")
    assert train(runner, synth_csv, tmp_path / "env").exit_code == 0
    assert "seed=4\n" in (tmp_path / "env" / "effective-config.txt").read_text()


def test_predict_then_eval_reproduces_validation_rmse(runner, synth_csv, tmp_path):
    assert train(runner, synth_csv, tmp_path / "t").exit_code == 0
    best = [ln for ln in (tmp_path / "t" / "train.log").read_text().splitlines()
            if ln.startswith("finetune-best")]
    logged = float(best[0].split("\t")[3])
    args = ["--checkpoint", str(tmp_path / "t" / "checkpoint.bin"), "--data", str(tmp_path / "t" / "validation.csv")]
    assert runner.invoke(cli.main, ["predict", *args, "--out", str(tmp_path / "p")]).exit_code == 0
    pred = np.loadtxt(tmp_path / "p" / "predictions.csv", delimiter=",", skiprows=1)
    truth = np.loadtxt(tmp_path / "t" / "validation.csv", delimiter=",", skiprows=1)[:, 10:]
    assert abs(np.sqrt(np.mean((pred - truth) ** 2)) - logged) < 1e-10
    res = runner.invoke(cli.main, ["eval", *args, "--out", str(tmp_path / "e")])
    assert res.exit_code == 0
    reported = read_report_csv((tmp_path / "e" / "report.csv").read_text())
    assert abs(list(reported.values())[0][0] - logged) < 1e-10


@pytest.mark.parametrize("kind", ["mlp", "ridge"])
def test_train_baselines(runner, synth_csv, tmp_path, kind):
    res = train(runner, synth_csv, tmp_path / kind, "--model", kind)
    assert res.exit_code == 0, res.output
    res = runner.invoke(cli.main, ["eval", "--checkpoint", str(tmp_path / kind / "checkpoint.bin"),
                                   "--data", str(synth_csv), "--out", str(tmp_path / "e")])
    assert res.exit_code == 0


def test_crossval_three_models(runner, synth_csv, tmp_path):
    out = tmp_path / "cv"
    res = runner.invoke(cli.main, ["crossval", "--data", str(synth_csv), "--set", "n_in=10", "--k", "10",
                                   "--models", "hnnso,mlp,ridge", "--out", str(out), *FAST])
    assert res.exit_code == 0, res.output
    table = (out / "report.txt").read_text().splitlines()
    assert [ln.split()[0] for ln in table[1:4]] == ["hnnso", "mlp", "ridge"]
    folds = read_report_csv((out / "report.csv").read_text())
    assert {k: len(v) for k, v in folds.items()} == {"hnnso": 10, "mlp": 10, "ridge": 10}
    header = (out / "predictions.csv").read_text().splitlines()[0].split(",")
    assert len(header) == 24 and header[0] == "hnnso.y0"


def test_digits_pipeline_with_images(runner, tmp_path):
    res = runner.invoke(cli.main, ["synth", "--kind", "digits", "--out", str(tmp_path / "d"),
                                   "--set", "synth_d=60"])
    assert res.exit_code == 0
    assert (tmp_path / "d" / "digits-images.idx").exists()
    assert "width=8" in (tmp_path / "d" / "metadata.txt").read_text()
    out = tmp_path / "cv"
    res = runner.invoke(cli.main, ["crossval", "--data", str(tmp_path / "d" / "digits.csv"), "--set", "half_image=true",
                                   "--k", "3", "--models", "hnnso,mlp", "--images", "8", "8", "--out", str(out), *FAST])
    assert res.exit_code == 0, res.output
    pgms = sorted((out / "images").glob("*.pgm"))
    assert len(pgms) == 10
    assert pgms[0].read_text().startswith("P2\n24 8\n255\n")


def test_idx_source_with_pca(runner, tmp_path):
    runner.invoke(cli.main, ["synth", "--kind", "digits", "--out", str(tmp_path / "d"), "--set", "synth_d=60"])
    res = runner.invoke(cli.main, ["crossval", "--set", "source=idx", "--data", str(tmp_path / "d" / "digits-images.idx"),
                                   "--set", "pca=8", "--k", "3", "--models", "ridge,mlp", "--out", str(tmp_path / "cv"),
                                   *FAST])
    assert res.exit_code == 0, res.output
    res = runner.invoke(cli.main, ["train", "--set", "source=idx", "--data", str(tmp_path / "d" / "digits-images.idx"),
                                   "--set", "pca=8", "--out", str(tmp_path / "t")])
    assert res.exit_code == 2

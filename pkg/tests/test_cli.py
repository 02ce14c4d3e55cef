import json
import subprocess
import sys

import numpy as np
import pytest

from incentives.cli import main
from incentives.data import Dataset

MIXTURE = {"priors": [0.3, 0.7], "means": [[1.0, 0.0], [-1.0, 0.0]], "stds": [1.0, 1.0]}


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def small_experiment(tmp_path):
    return write_json(
        tmp_path / "exp.json",
        {
            "dataset": {"mixture": MIXTURE, "n": 300},
            "weighting": {"emphasized_class": 1, "ratio": 9},
            "train": {"max_steps": 40, "interval": 20},
            "runs": 2,
        },
    )


class TestCurves:
    def test_three_rows(self, tmp_path, capsys):
        out = tmp_path / "c.csv"
        assert main(["curves", "--w1", "0.5", "--step", "0.25", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[1] == "q1,prediction,marginal,residual"
        assert len(lines[2:]) == 3
        assert len(capsys.readouterr().out.strip().splitlines()) == 1

    def test_bad_step(self, tmp_path):
        assert main(["curves", "--w1", "0.5", "--step", "0.3", "--out", str(tmp_path / "c.csv")]) == 2
        assert not (tmp_path / "c.csv").exists()


class TestUsage:
    def test_unknown_flag(self, capsys):
        assert main(["curves", "--bogus"]) == 2
        assert "usage" in capsys.readouterr().err

    def test_no_subcommand(self):
        assert main([]) == 2

    def test_module_entry(self, tmp_path):
        r = subprocess.run(
            [sys.executable, "-m", "incentives", "curves", "--w1", "0.9", "--step", "0.5", "--out", str(tmp_path / "c.csv")],
            capture_output=True,
            text=True,
        )
        assert r.returncode == 0, r.stderr
        assert r.stdout.startswith("curves:")


class TestRecalibrate:
    def test_round_trip(self, tmp_path):
        (tmp_path / "u.csv").write_text("99,0\n0,1\n")
        (tmp_path / "p.csv").write_text("0.99,0.01\n0.5,0.5\n")
        out = tmp_path / "q.csv"
        assert main(["recalibrate", "--utility", str(tmp_path / "u.csv"), "--predictions", str(tmp_path / "p.csv"), "--out", str(out)]) == 0
        Q = np.loadtxt(out, delimiter=",")
        np.testing.assert_allclose(Q, [[0.5, 0.5], [1 / 100, 99 / 100]], atol=1e-12)

    def test_singular(self, tmp_path, capsys):
        (tmp_path / "u.csv").write_text("1,1\n1,1\n")
        (tmp_path / "p.csv").write_text("0.5,0.5\n")
        code = main(["recalibrate", "--utility", str(tmp_path / "u.csv"), "--predictions", str(tmp_path / "p.csv"), "--out", str(tmp_path / "q.csv")])
        assert code == 3
        assert "InvertibilityError" in capsys.readouterr().err

    def test_negative_utility(self, tmp_path):
        (tmp_path / "u.csv").write_text("1,-1\n0,1\n")
        (tmp_path / "p.csv").write_text("0.5,0.5\n")
        code = main(["recalibrate", "--utility", str(tmp_path / "u.csv"), "--predictions", str(tmp_path / "p.csv"), "--out", str(tmp_path / "q.csv")])
        assert code == 2

    def test_missing_file(self, tmp_path):
        code = main(["recalibrate", "--utility", str(tmp_path / "nope.csv"), "--predictions", "x", "--out", "y"])
        assert code == 2


class TestAudit:
    def test_fixture(self, tmp_path):
        (tmp_path / "p.csv").write_text("0.8,0.2\n0.8,0.2\n0.8,0.2\n0.3,0.7\n")
        (tmp_path / "y.txt").write_text("1\n1\n2\n2\n")
        out = tmp_path / "a.json"
        assert main(["audit", "--predictions", str(tmp_path / "p.csv"), "--labels", str(tmp_path / "y.txt"), "--out", str(out)]) == 0
        r = json.loads(out.read_text())
        assert r["learning_identity"]["lhs"] == pytest.approx(0.603100, abs=1e-6)
        assert r["learning_identity"]["gap"] < 1e-12
        assert len(r["loss_calibration"]["groups"]) == 2

    def test_miscalibrated_with_grid(self, tmp_path):
        (tmp_path / "p.csv").write_text("0.6666666666666666,0.3333333333333333\n" * 3)
        (tmp_path / "y.txt").write_text("1\n1\n2\n")
        (tmp_path / "u.csv").write_text("99,0\n0,1\n")
        out = tmp_path / "a.json"
        args = ["audit", "--predictions", str(tmp_path / "p.csv"), "--labels", str(tmp_path / "y.txt")]
        args += ["--utility", str(tmp_path / "u.csv"), "--quantize", "grid:0.05", "--out", str(out)]
        assert main(args) == 0
        assert json.loads(out.read_text())["loss_calibration"]["max_deviation"] == pytest.approx(0.328308, abs=1e-6)

    def test_length_mismatch(self, tmp_path):
        (tmp_path / "p.csv").write_text("0.5,0.5\n")
        (tmp_path / "y.txt").write_text("1\n2\n")
        assert main(["audit", "--predictions", str(tmp_path / "p.csv"), "--labels", str(tmp_path / "y.txt"), "--out", str(tmp_path / "a.json")]) == 2


class TestDataAndTrain:
    def test_datagen_then_train(self, tmp_path):
        mix = write_json(tmp_path / "mix.json", MIXTURE)
        data = tmp_path / "d.csv"
        assert main(["datagen", "--mixture", mix, "--n", "200", "--seed", "3", "--out", str(data)]) == 0
        assert len(Dataset.load(data)) == 200
        first = data.read_bytes()
        assert main(["datagen", "--mixture", mix, "--n", "200", "--seed", "3", "--out", str(data)]) == 0
        assert data.read_bytes() == first

        cfg = write_json(tmp_path / "t.json", {"model": {"family": "linear-softmax"}, "train": {"max_steps": 30, "interval": 10}})
        out = tmp_path / "run"
        assert main(["train", "--config", cfg, "--data", str(data), "--out", str(out)]) == 0
        assert (out / "trace.csv").read_text().splitlines()[0] == "step,learning_rate,train_loss,validation_loss,test_loss"
        assert len((out / "trace.csv").read_text().splitlines()) == 5
        assert len(json.loads((out / "summary.json").read_text())["fingerprint"]) == 64

    def test_bad_mixture(self, tmp_path):
        mix = write_json(tmp_path / "mix.json", {"priors": [1.0, 0.0], "means": [[0], [1]], "stds": [1, 1]})
        assert main(["datagen", "--mixture", mix, "--n", "10", "--out", str(tmp_path / "d.csv")]) == 2

    def test_bad_fractions(self, tmp_path):
        mix = write_json(tmp_path / "mix.json", MIXTURE)
        assert main(["datagen", "--mixture", mix, "--n", "10", "--fractions", "0.5,0.5", "--out", str(tmp_path / "d.csv")]) == 2


class TestExperiment:
    def test_writes_outputs(self, tmp_path, capsys):
        out = tmp_path / "report"
        assert main(["experiment", "--config", small_experiment(tmp_path), "--out", str(out)]) == 0
        assert (out / "report.json").exists() and (out / "series.csv").exists()
        assert json.loads((out / "report.json").read_text())["schema_version"] == 1
        assert capsys.readouterr().out.count("\n") == 1

    def test_byte_identical(self, tmp_path):
        cfg = small_experiment(tmp_path)
        main(["experiment", "--config", cfg, "--out", str(tmp_path / "a")])
        main(["experiment", "--config", cfg, "--out", str(tmp_path / "b")])
        assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()
        assert (tmp_path / "a" / "series.csv").read_bytes() == (tmp_path / "b" / "series.csv").read_bytes()

    def test_invalid_config(self, tmp_path):
        cfg = write_json(tmp_path / "exp.json", {"dataset": {"mixture": MIXTURE, "n": 300}, "runs": 0})
        assert main(["experiment", "--config", cfg, "--out", str(tmp_path / "r")]) == 2

    def test_divergence_exit_and_partial(self, tmp_path, monkeypatch):
        import incentives.experiment as ex
        from incentives.errors import DivergenceError

        def boom(config, k):
            raise DivergenceError("non-finite loss at step 3", step=3)

        monkeypatch.setattr(ex, "_run_one", boom)
        out = tmp_path / "r"
        assert main(["experiment", "--config", small_experiment(tmp_path), "--out", str(out)]) == 3
        assert json.loads((out / "partial.json").read_text())["failed_step"] == 3

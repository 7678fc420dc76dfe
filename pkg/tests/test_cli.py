import csv

import numpy as np
import pytest

from mtft.cli import main, read_config
from mtft.masking import build_scale_masks

MODEL = ["--d-model", "8", "--heads", "2", "--layers", "2"]


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli") / "data"
    assert main(["synth", "--seed", "3", "--count", "12", "--test-count", "6", "--len", "6", "--t-f", "10",
                 "--neighbors", "1", "--out", str(root)]) == 0
    return root


@pytest.fixture(scope="module")
def trained(dataset, tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "run"
    assert main(["train", "--seed", "1", "--data", str(dataset), "--epochs", "2", "--batch-size", "4",
                 "--out", str(out)] + MODEL) == 0
    return out


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestExitCodes:
    def test_unknown_flag(self, tmp_path, capsys):
        assert main(["synth", "--seed", "1", "--out", str(tmp_path / "x"), "--bogus"]) == 2

    def test_missing_seed(self, tmp_path, capsys):
        assert main(["synth", "--out", str(tmp_path / "x")]) == 2
        assert "--seed is required" in capsys.readouterr().err

    def test_missing_data_directory(self, tmp_path, capsys):
        code = main(["train", "--seed", "1", "--data", str(tmp_path / "nowhere"), "--out", str(tmp_path / "o")])
        assert code == 1
        err = capsys.readouterr().err.strip()
        assert err.count("\n") == 0 and "FileNotFoundError" in err
        assert not (tmp_path / "o").exists()

    def test_existing_output_needs_force(self, tmp_path, capsys):
        out = tmp_path / "d"
        args = ["synth", "--seed", "1", "--count", "2", "--len", "4", "--t-f", "3", "--out", str(out)]
        assert main(args) == 0
        assert main(args) == 1
        assert "--force" in capsys.readouterr().err
        assert main(args + ["--force"]) == 0

    def test_gradcheck_verdict_sets_exit_code(self, capsys):
        base = ["gradcheck", "--seed", "0", "--max-elements", "256"]
        assert main(base + ["--tol", "1.0"]) == 0
        assert "pass" in capsys.readouterr().out
        assert main(base + ["--tol", "1e-300"]) == 1
        assert "GradcheckFailure" in capsys.readouterr().err


class TestPipeline:
    def test_synth_is_deterministic(self, dataset, tmp_path):
        again = tmp_path / "again"
        assert main(["synth", "--seed", "3", "--count", "12", "--test-count", "6", "--len", "6", "--t-f", "10",
                     "--neighbors", "1", "--out", str(again)]) == 0
        for split in ("train", "test"):
            assert (again / split / "scenes.csv").read_bytes() == (dataset / split / "scenes.csv").read_bytes()

    def test_train_outputs(self, trained):
        assert (trained / "checkpoint.bin").exists()
        assert len(read_rows(trained / "loss_curve.csv")) == 3
        cfg = read_config(trained / "config.txt")
        assert cfg["seed"] == "1" and cfg["d_model"] == "8"

    def test_eval_is_byte_identical_on_rerun(self, dataset, trained, tmp_path):
        args = ["eval", "--seed", "2", "--data", str(dataset), "--split", "test",
                "--checkpoint", str(trained / "checkpoint.bin"), "--interval", "60-90"]
        assert main(args + ["--out", str(tmp_path / "a")]) == 0
        assert main(args + ["--out", str(tmp_path / "b")]) == 0
        for name in ("metrics.csv", "rmse_by_horizon.csv", "predictions.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        rows = read_rows(tmp_path / "a" / "metrics.csv")
        assert len(rows) == 2
        assert len(read_rows(tmp_path / "a" / "predictions.csv")) == 1 + 6 * 10

    def test_config_snapshot_reproduces_run(self, dataset, trained, tmp_path):
        assert main(["train", "--config", str(trained / "config.txt"), "--out", str(tmp_path / "r")]) == 0
        assert (tmp_path / "r" / "loss_curve.csv").read_bytes() == (trained / "loss_curve.csv").read_bytes()
        assert (tmp_path / "r" / "checkpoint.bin").read_bytes() == (trained / "checkpoint.bin").read_bytes()

    def test_flags_override_config(self, trained, tmp_path):
        assert main(["train", "--config", str(trained / "config.txt"), "--epochs", "1",
                     "--out", str(tmp_path / "r")]) == 0
        assert len(read_rows(tmp_path / "r" / "loss_curve.csv")) == 2

    def test_mask_writes_masks(self, dataset, tmp_path):
        out = tmp_path / "m"
        assert main(["mask", "--seed", "4", "--data", str(dataset), "--interval", "60-90", "--out", str(out)]) == 0
        rows = read_rows(out / "masks.csv")
        assert rows[0] == ["scene_id", "vehicle_id"] + [f"t{t}" for t in range(6)]
        assert len(rows) == 1 + 12 * 2
        zeros = [r[2:].count("0") for r in rows[1:]]
        assert all(4 <= z <= 5 for z in zeros)

    def test_ablate_grid(self, dataset, tmp_path):
        out = tmp_path / "ab"
        assert main(["ablate", "--seed", "0", "--data", str(dataset), "--epochs", "1", "--batch-size", "6",
                     "--out", str(out)] + MODEL) == 0
        files = sorted(p.name for p in out.iterdir() if p.suffix == ".csv")
        table = read_rows(out / files[0])
        assert len(table) == 1 + 9

    def test_dump_attention_support(self, dataset, trained, tmp_path):
        out = tmp_path / "att"
        assert main(["dump-attention", "--seed", "0", "--data", str(dataset), "--checkpoint",
                     str(trained / "checkpoint.bin"), "--scenes", "2", "--out", str(out)]) == 0
        masks = build_scale_masks(6, 2).masks
        files = sorted(out.glob("*/*_layer*_head*.csv"))
        assert len(files) == 2 * 2 * 2 * 2
        for f in files:
            head = int(f.stem.rsplit("head", 1)[1])
            w = np.loadtxt(f, delimiter=",")
            np.testing.assert_array_equal(w > 0, masks[head] == 1)
            np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-9)

    def test_dump_continuity(self, dataset, trained, tmp_path):
        out = tmp_path / "cont"
        assert main(["dump-continuity", "--seed", "0", "--data", str(dataset), "--checkpoint",
                     str(trained / "checkpoint.bin"), "--scenes", "1", "--out", str(out)]) == 0
        weights = np.loadtxt(next(out.glob("*/v0_weights.csv")), delimiter=",")
        assert weights.shape == (2, 6)
        np.testing.assert_allclose(weights.sum(axis=1), 1.0, atol=1e-12)

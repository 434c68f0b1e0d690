import csv

import numpy as np
import pytest

from gldpose import checkpoint
from gldpose.cli import main

SMALL = ["--set", "synth.n_samples=200", "--set", "synth.n_test=50", "--set", "train.epochs=2",
         "--set", "network.hidden_dims=16", "--set", "synth.input_dim=12", "--set", "network.input_dim=12"]


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# gldpose ")
    return list(csv.reader(lines[1:]))


def test_encode_fig4(tmp_path):
    out = tmp_path / "yaw.csv"
    assert main(["encode", "--gt-yaw", "-30", "--sigma", "4", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0] == ["bin_center_deg", "probability"]
    centers = np.array([float(r[0]) for r in rows[1:]])
    probs = np.array([float(r[1]) for r in rows[1:]])
    assert len(probs) == 66
    assert centers[np.argmax(probs)] == -28.5
    assert abs(probs.sum() - 1) < 1e-9


def test_encode_tiny_sigma(tmp_path, capsys):
    assert main(["encode", "--gt-yaw", "0", "--sigma", "0.001"]) == 0
    rows = list(csv.reader(capsys.readouterr().out.splitlines()[2:]))
    assert max(float(r[1]) for r in rows) >= 0.999


def test_encode_out_of_range(capsys):
    assert main(["encode", "--gt-yaw", "150"]) == 2
    assert "yaw" in capsys.readouterr().err


def test_encode_three_angles(tmp_path):
    out = tmp_path / "pose.csv"
    assert main(["encode", "--gt-yaw", "10", "--gt-pitch", "-5", "--gt-roll", "0", "--out", str(out)]) == 0
    for name in ("yaw", "pitch", "roll"):
        assert (tmp_path / f"pose_{name}.csv").exists()


def test_gradcheck_exit_codes(capsys):
    assert main(["gradcheck", "--trials", "2"]) == 0
    assert "network" in capsys.readouterr().out
    assert main(["gradcheck", "--trials", "0"]) == 2
    assert main(["gradcheck", "--trials", "2", "--perturb", "total"]) == 1
    assert "total" in capsys.readouterr().err


def test_usage_error_from_argparse():
    with pytest.raises(SystemExit) as info:
        main(["train"])
    assert info.value.code == 2


def test_config_inconsistency_rejected_before_work(tmp_path):
    out = tmp_path / "o"
    assert main(["synth", "--out-dir", str(out), "--set", "network.num_bins=60"]) == 2
    assert not out.exists()
    assert main(["synth", "--out-dir", str(out), "--set", "network.input_dim=5"]) == 2
    assert main(["synth", "--out-dir", str(out), "--set", "nope.key=1"]) == 2


def test_config_file(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[synth]\nn_samples = 30\nn_test = 10\n")
    assert main(["synth", "--config", str(cfg), "--out-dir", str(tmp_path / "d")]) == 0
    assert len(read_csv(tmp_path / "d" / "train.csv")) == 31
    assert "n_samples = 30" in (tmp_path / "d" / "config.ini").read_text()


def _pipeline(root, extra=()):
    d, m = root / "data", root / "model"
    assert main(["synth", "--out-dir", str(d), *SMALL, *extra]) == 0
    assert main(["train", "--data", str(d / "train"), "--out-dir", str(m), *SMALL, *extra]) == 0
    assert main(["eval", "--checkpoint", str(m / "checkpoint.ldlp"), "--data", str(d / "test"),
                 "--out-dir", str(m), *SMALL, *extra]) == 0
    return d, m


def test_pipeline_deterministic(tmp_path):
    d1, m1 = _pipeline(tmp_path / "a")
    d2, m2 = _pipeline(tmp_path / "b")
    for rel in ("data/train.csv", "data/train.ldlf", "data/test.ldlf", "model/checkpoint.ldlp",
                "model/metrics.csv", "model/eval.csv", "model/config.ini"):
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes(), rel


def test_alpha_changes_checkpoint(tmp_path):
    _pipeline(tmp_path / "a", ["--alpha", "0"])
    _pipeline(tmp_path / "b", ["--alpha", "0.01"])
    a = (tmp_path / "a/model/checkpoint.ldlp").read_bytes()
    b = (tmp_path / "b/model/checkpoint.ldlp").read_bytes()
    assert a != b
    net, state = checkpoint.load(tmp_path / "a/model/checkpoint.ldlp")
    assert net.hidden_dims == (16,) and state.step > 0


def test_train_missing_data(tmp_path):
    assert main(["train", "--data", str(tmp_path / "none"), "--out-dir", str(tmp_path)]) == 2


def test_compare_small(tmp_path, capsys):
    assert main(["compare", "--out-dir", str(tmp_path), *SMALL, "--set", "compare.seeds=0,1"]) == 0
    rows = read_csv(tmp_path / "comparison.csv")
    assert rows[0] == ["arm", "seed", "metric", "value"]
    assert {r[0] for r in rows[1:]} == {"gld", "ce"}
    assert {r[1] for r in rows[1:]} == {"0", "1", "median"}
    assert "rare_yaw_mae" in capsys.readouterr().out


@pytest.mark.slow
def test_default_pipeline_mae(tmp_path):
    d, m = tmp_path / "d", tmp_path / "m"
    assert main(["synth", "--out-dir", str(d)]) == 0
    assert main(["train", "--data", str(d / "train"), "--out-dir", str(m)]) == 0
    assert main(["eval", "--checkpoint", str(m / "checkpoint.ldlp"), "--data", str(d / "test"),
                 "--out-dir", str(m)]) == 0
    rows = read_csv(m / "eval.csv")
    mean = next(float(r[3]) for r in rows if r[0] == "mean")
    assert mean < 15.0

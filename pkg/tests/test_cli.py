import json
import os

import pytest

from pushgrasp.cli import main


def test_usage_error_exit_code():
    assert main(["bogus"]) == 1
    assert main(["train"]) == 1  # missing required --cae


def test_pretrain_then_train_then_eval(tmp_path, capsys):
    cae_dir = str(tmp_path / "cae")
    config = str(tmp_path / "cfg.json")
    with open(config, "w") as fh:
        json.dump({"epochs": 1}, fh)
    assert main(["pretrain-cae", "--num-images", "30", "--seed", "0",
                 "--out", cae_dir, "--config", config]) == 0
    out = capsys.readouterr().out
    assert "30 images" in out
    cae_ckpt = os.path.join(cae_dir, "cae.ckpt")
    assert os.path.exists(cae_ckpt)
    report = json.load(open(os.path.join(cae_dir, "cae_report.json")))
    assert report["num_images"] == 30

    run_dir = str(tmp_path / "run")
    train_cfg = str(tmp_path / "train.json")
    with open(train_cfg, "w") as fh:
        json.dump({"policy": {"batch_size": 6, "buffer_capacity": 32}}, fh)
    assert main(["train", "--cae", cae_ckpt, "--iterations", "2",
                 "--rollouts", "6", "--workers", "1", "--seed", "3",
                 "--out", run_dir, "--config", train_cfg]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["episodes"] == 12
    ckpt = os.path.join(run_dir, "policy_final.ckpt")
    assert os.path.exists(ckpt)

    eval_out = str(tmp_path / "eval.json")
    assert main(["eval", "--checkpoint", ckpt, "--scenes", "2", "--k", "2",
                 "--seed", "9", "--out", eval_out]) == 0
    report = json.load(open(eval_out))
    assert report["num_scenes"] == 2
    assert "improvement_fraction" in report


def test_train_missing_cae_is_runtime_error(tmp_path):
    assert main(["train", "--cae", str(tmp_path / "missing.ckpt"),
                 "--iterations", "1", "--workers", "1",
                 "--out", str(tmp_path / "x")]) == 2


def test_eval_missing_checkpoint_is_runtime_error(tmp_path):
    assert main(["eval", "--checkpoint", str(tmp_path / "nope.ckpt")]) == 2

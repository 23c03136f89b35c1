import json
import math
import os
import sys

import numpy as np
import pytest

import scenequal


def test_ssim_identity_and_degradation():
    rng = np.random.default_rng(0)
    img = rng.random((32, 32, 3), dtype=np.float32)
    assert scenequal.ssim(img, img) == pytest.approx(1.0, abs=1e-9)
    blurred = scenequal.distort(img, "gaussian_blur", 3)
    assert scenequal.ssim(img, blurred) < 1.0


def test_guidance_values():
    assert scenequal.rep_guidance(0.0) == 1.0
    assert scenequal.rep_guidance(0.25) == pytest.approx(0.0)
    clip = [np.full((24, 24, 3), 0.5, dtype=np.float32)] * 3
    assert scenequal.iqa_guidance(clip, clip) == pytest.approx(1.0)


def test_losses():
    assert scenequal.cosine_sim([1.0, 1.0], [2.0, 2.0]) == pytest.approx(1.0)
    assert scenequal.mbw_branch_loss([1.0, 0.0], [0.0, 1.0], 0.5) == pytest.approx(0.5)
    sigma = 0.7
    expected = 0.25 / (2 * sigma * sigma) + math.log(sigma)
    assert scenequal.aqb_branch_loss([1.0, 0.0], [0.0, 1.0], 0.5, math.log(sigma)) == pytest.approx(expected)
    with pytest.raises(scenequal.Error):
        scenequal.mbw_branch_loss([1.0, 0.0], [1.0, 0.0], 1.5)


def test_metrics():
    assert scenequal.srcc([1, 2, 3], [1, 3, 2]) == 0.5
    assert scenequal.krcc([1, 2, 3], [1, 3, 2]) == pytest.approx(1 / 3)
    assert scenequal.plcc([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    bt = scenequal.bradley_terry(["x", "y"], [[0, 3], [1, 0]])
    assert bt["converged"]
    assert bt["scores"]["x"] == pytest.approx(0.75)


def test_pair_budget_is_exact():
    assert scenequal.pair_budget(10, 300, 5, 5, 20) == 18_000_000
    assert scenequal.pair_budget(10**6, 10**6, 10**6, 10**6, 10**6) == 499999999999500000000000000000000000000000


def test_default_config_and_parameter_count():
    cfg = scenequal.default_config()
    assert set(cfg) >= {"data", "prep", "guidance", "backbone", "train", "eval", "synth"}
    assert 3_500_000 <= scenequal.parameter_count() <= 6_000_000
    with pytest.raises(scenequal.ConfigError):
        scenequal.parameter_count({"repr_dim": 30, "attention_heads": 4})


def test_synth_train_extract_evaluate(tmp_path):
    labels = scenequal.generate_synth(tmp_path / "data", n_scenes=2, views_per_scene=4, height=32, width=32)
    assert len(labels) == 8
    config = {
        "data": {"root": str(tmp_path / "data")},
        "prep": {"clip_min": 2, "clip_max": 3, "crop_min": 24, "crop_max": 32},
        "guidance": {"calibration_pairs": 100},
        "backbone": {"stage_channels": [4, 8, 8, 16], "repr_dim": 16, "transformer_layers": 1,
                     "attention_heads": 2, "projector_hidden": 16, "projector_out": 8, "max_views": 16},
        "train": {"epochs": 1, "batch_size": 3, "pairs_per_epoch": 6, "learning_rate": 1e-3,
                  "out_dir": str(tmp_path / "run")},
        "eval": {"out_dir": str(tmp_path / "eval")},
    }
    ckpt = scenequal.train(config)
    assert os.path.exists(ckpt)

    model = scenequal.FrozenModel(ckpt)
    assert model.repr_dim == 16
    assert model.checkpoint_hash == scenequal.sha256_file(ckpt)
    views = [np.random.default_rng(i).random((32, 32, 3), dtype=np.float32) for i in range(3)]
    a, b = model.extract(views), model.extract(views)
    assert a.shape == (16,)
    assert np.array_equal(a, b)

    report = scenequal.evaluate(config, ckpt)
    assert report["protocol"] == "half_split"
    assert not set(map(tuple, report["fit_keys"])) & set(map(tuple, report["test_keys"]))
    assert (tmp_path / "eval" / "scatter.svg").exists()


def test_cli_exit_codes(tmp_path):
    assert scenequal.run_cli(["--help"]) == 0
    assert scenequal.run_cli(["bogus"]) == 2
    assert scenequal.run_cli(["-q", "synth", "-o", str(tmp_path / "d"), "--scenes", "2", "--views", "3",
                              "--height", "32", "--width", "32"]) == 0

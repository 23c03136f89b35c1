"""Self-supervised quality representations for rendered multi-view scenes."""

from __future__ import annotations

import json
import os
from typing import Any, Mapping, Sequence

import torch  # noqa: F401  loads libtorch for the extension

from . import _core
from ._core import (
    ConfigError,
    Error,
    FormatError,
    FrozenModel,
    aqb_branch_loss,
    bradley_terry,
    cosine_sim,
    distort,
    iqa_guidance,
    krcc,
    mbw_branch_loss,
    plcc,
    rep_guidance,
    run_cli,
    sha256_file,
    srcc,
    ssim,
    vqa_guidance,
)

__all__ = [
    "ConfigError",
    "Error",
    "FormatError",
    "FrozenModel",
    "aqb_branch_loss",
    "bradley_terry",
    "cosine_sim",
    "default_config",
    "distort",
    "evaluate",
    "generate_synth",
    "iqa_guidance",
    "krcc",
    "mbw_branch_loss",
    "pair_budget",
    "parameter_count",
    "plcc",
    "rep_guidance",
    "run_cli",
    "sha256_file",
    "srcc",
    "ssim",
    "train",
    "vqa_guidance",
]


def default_config() -> dict[str, Any]:
    """The full run configuration with every default filled in."""
    return json.loads(_core.default_config_json())


def pair_budget(scenes: int, views: int, methods: int, clip_lengths: int, angles: int) -> int:
    """Exact number of distinct contrastive pairs (arbitrary precision)."""
    return int(_core.pair_budget_str(scenes, views, methods, clip_lengths, angles))


def parameter_count(backbone: Mapping[str, Any] | None = None) -> int:
    return _core.parameter_count_json(json.dumps(dict(backbone or {})))


def generate_synth(out: str | os.PathLike, **spec: Any) -> dict[str, float]:
    """Writes a procedural dataset; returns labels keyed by "scene/method"."""
    return _core.generate_synth_json(json.dumps(spec), os.fspath(out))


def train(config: Mapping[str, Any]) -> str:
    """Runs training from a run-config mapping; returns the final checkpoint path."""
    return os.fspath(_core.train_json(json.dumps(config)))


def evaluate(config: Mapping[str, Any], checkpoint: str | os.PathLike) -> dict[str, Any]:
    """Frozen extraction, regression and scene-wise scoring; returns report.json."""
    return json.loads(_core.evaluate_json(json.dumps(config), os.fspath(checkpoint)))


def extract(checkpoint: str | os.PathLike, views: Sequence[Any]):
    """Representation of one clip given as a list of HxWx3 float arrays in [0, 1]."""
    return FrozenModel(os.fspath(checkpoint)).extract(list(views))

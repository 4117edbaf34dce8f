from __future__ import annotations

import subprocess
import sys
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parents[2]


def run_primary(args: list[str]) -> str:
    result = subprocess.run(
        [sys.executable, "-m", "varmatch.cli", *[str(a) for a in args]],
        capture_output=True, text=True)
    assert result.returncode == 0, result.stderr
    return result.stdout


@pytest.fixture(scope="session")
def tiny_pairs(tmp_path_factory) -> Path:
    """A small exported pair file built through the primary CLI."""
    workdir = tmp_path_factory.mktemp("tiny")
    catalog = workdir / "catalog.jsonl"
    pairs = workdir / "pairs.jsonl"
    run_primary(["synth", "--out", catalog, "--types", "2", "--brands-per-type", "2",
                 "--groups-per-brand", "8", "--size-min", "3", "--size-max", "4",
                 "--variation-keys", "2", "--common-keys", "fabric,origin",
                 "--seed", "3"])
    run_primary(["pairs", "--catalog", catalog, "--out", pairs,
                 "--budget", "64", "--seed", "3"])
    return pairs


@pytest.fixture(scope="session")
def tiny_checkpoint(tiny_pairs, tmp_path_factory) -> Path:
    from varmatch_sidecar.train import TrainConfig, finetune

    out = tmp_path_factory.mktemp("ckpt") / "tiny"
    config = TrainConfig(epochs=30, learning_rate=1e-3, batch_size=8,
                         base_model="scratch:tiny", checkpoint=str(out), seed=1)
    return finetune(tiny_pairs, config)

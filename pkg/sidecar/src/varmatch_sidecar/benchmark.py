"""Seeded synthetic benchmark driven end to end through the primary CLI.

The committed spec (benchmark.json) pins the catalog shape, pair sampling,
and training overrides. Data generation, the deterministic baseline, and all
metric computation go through `varmatch` subcommands; this module only trains
the encoder and writes its scores in the primary's score-file format.
"""

from __future__ import annotations

import json
import random
import subprocess
import sys
from dataclasses import dataclass, replace
from pathlib import Path

from .data import PairExample, load_pair_file
from .model import PairScorer
from .train import TrainConfig, finetune


def run_primary(args: list[str]) -> str:
    """Invoke the primary CLI in a subprocess and return stdout."""
    result = subprocess.run(
        [sys.executable, "-m", "varmatch.cli", *args],
        capture_output=True, text=True)
    if result.returncode != 0:
        raise RuntimeError(
            f"varmatch {' '.join(args)} failed ({result.returncode}):\n{result.stderr}")
    return result.stdout


@dataclass
class BenchmarkSpec:
    seed: int
    synth_args: list[str]
    pairs_args: list[str]
    train: dict
    min_auroc: float
    curve_sizes: list[int]
    curve_epochs: int

    @classmethod
    def load(cls, path: str | Path) -> "BenchmarkSpec":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(**raw)


@dataclass
class BenchmarkResult:
    baseline_auroc: float
    model_auroc: float
    curve_auroc: dict[int, float]
    n_train: int
    n_eval: int

    def as_dict(self) -> dict:
        return {
            "baseline_auroc": self.baseline_auroc,
            "model_auroc": self.model_auroc,
            "curve_auroc": {str(k): v for k, v in self.curve_auroc.items()},
            "n_train": self.n_train,
            "n_eval": self.n_eval,
        }


def write_score_file(path: Path, examples: list[PairExample], scores: list[float]) -> None:
    """Emit scores in the primary's score-file format for `varmatch eval`."""
    with path.open("w", encoding="utf-8") as sink:
        sink.write(json.dumps({"record": "meta", "kind": "scores", "backend": "sidecar"}) + "\n")
        for example, score in zip(examples, scores):
            sink.write(json.dumps({
                "record": "score",
                "left_id": example.left_id,
                "right_id": example.right_id,
                "gold": "variant_match" if example.label == 1 else "mismatch",
                "score": score,
            }) + "\n")


def eval_auroc(scores_path: Path, out_dir: Path) -> float:
    run_primary(["eval", "--scores", str(scores_path), "--out", str(out_dir)])
    payload = json.loads((out_dir / "report.json").read_text(encoding="utf-8"))
    return float(payload["match"]["auroc"])


def balanced_subset(examples: list[PairExample], size: int, seed: int) -> list[PairExample]:
    positives = [e for e in examples if e.label == 1]
    negatives = [e for e in examples if e.label == 0]
    rng = random.Random(seed)
    take_pos = min(size // 2 + size % 2, len(positives))
    take_neg = min(size - take_pos, len(negatives))
    subset = rng.sample(positives, take_pos) + rng.sample(negatives, take_neg)
    rng.shuffle(subset)
    return subset


def prepare_dataset(spec: BenchmarkSpec, workdir: Path) -> Path:
    """Generate catalog and pairs through the primary CLI; return the pair file."""
    workdir.mkdir(parents=True, exist_ok=True)
    catalog = workdir / "catalog.jsonl"
    pairs = workdir / "pairs.jsonl"
    run_primary(["synth", *spec.synth_args, "--seed", str(spec.seed), "--out", str(catalog)])
    run_primary(["pairs", "--catalog", str(catalog), *spec.pairs_args,
                 "--seed", str(spec.seed), "--out", str(pairs)])
    run_primary(["match", "--pairs", str(pairs), "--catalog", str(catalog),
                 "--backend", "baseline", "--out", str(workdir / "baseline_scores.jsonl")])
    return pairs


def train_and_score(spec: BenchmarkSpec, pairs: Path, workdir: Path,
                    name: str, train_examples: list[PairExample] | None = None,
                    train_seed: int | None = None) -> float:
    config = TrainConfig(**spec.train, checkpoint=str(workdir / f"ckpt_{name}"))
    if train_seed is not None:
        config = replace(config, seed=train_seed)
    checkpoint = finetune(pairs, config, train_examples=train_examples)
    dataset = load_pair_file(pairs)
    scorer = PairScorer(checkpoint)
    scores = scorer.score_examples(dataset.examples_eval)
    score_file = workdir / f"{name}_scores.jsonl"
    write_score_file(score_file, dataset.examples_eval, scores)
    return eval_auroc(score_file, workdir / f"{name}_report")


def run_benchmark(config_path: str | Path, workdir: str | Path,
                  with_curve: bool = True) -> BenchmarkResult:
    spec = BenchmarkSpec.load(config_path)
    workdir = Path(workdir)
    pairs = prepare_dataset(spec, workdir)
    baseline = eval_auroc(workdir / "baseline_scores.jsonl", workdir / "baseline_report")

    model_auroc = train_and_score(spec, pairs, workdir, "full")

    curve: dict[int, float] = {}
    if with_curve:
        dataset = load_pair_file(pairs)
        curve_spec = replace_train(spec, epochs=spec.curve_epochs)
        for size in spec.curve_sizes:
            subset = balanced_subset(dataset.examples_train, size, seed=spec.seed + size)
            curve[size] = train_and_score(curve_spec, pairs, workdir, f"size{size}",
                                          train_examples=subset)

    dataset = load_pair_file(pairs)
    return BenchmarkResult(
        baseline_auroc=baseline,
        model_auroc=model_auroc,
        curve_auroc=curve,
        n_train=len(dataset.examples_train),
        n_eval=len(dataset.examples_eval),
    )


def replace_train(spec: BenchmarkSpec, **updates) -> BenchmarkSpec:
    train = dict(spec.train)
    train.update(updates)
    return BenchmarkSpec(
        seed=spec.seed, synth_args=spec.synth_args, pairs_args=spec.pairs_args,
        train=train, min_auroc=spec.min_auroc, curve_sizes=spec.curve_sizes,
        curve_epochs=spec.curve_epochs)

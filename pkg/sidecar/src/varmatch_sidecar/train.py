"""Supervised fine-tuning of the pair encoder on an exported pair dataset.

The default regime is one epoch of Adam at a 5e-6 learning rate with no
weight decay, minimizing the cross-entropy of the linear classification head.
From-scratch presets need a larger learning rate and a few epochs to converge;
those overrides live in the caller's config (see benchmark.json), the defaults
stay untouched.

Determinism: seeded torch + seeded shuffling make runs reproducible on one
machine/build; bitwise identity across BLAS builds is not guaranteed.
"""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass
from pathlib import Path

import torch

from .data import PairDataset, PairExample, SidecarError, WordVocab, load_pair_file
from .model import (
    HFEncoder,
    WordEncoder,
    batch_tensors,
    build_scratch_model,
    is_scratch,
    load_pretrained,
    save_checkpoint,
)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1
    learning_rate: float = 5e-6
    optimizer: str = "adam"
    weight_decay: float = 0.0
    batch_size: int = 32
    base_model: str = "scratch:tiny"
    checkpoint: str = "checkpoint"
    seed: int = 0
    lr_schedule: str = "constant"  # or "linear"
    grad_clip: float | None = None
    max_len: int | None = None  # None: the pair file's budget

    def validate(self) -> None:
        if self.epochs < 1:
            raise SidecarError("epochs must be >= 1 (no-op training rejected)")
        if self.learning_rate <= 0:
            raise SidecarError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise SidecarError("batch_size must be >= 1")
        if self.optimizer != "adam":
            raise SidecarError(f"unsupported optimizer {self.optimizer!r}")
        if self.lr_schedule not in ("constant", "linear"):
            raise SidecarError(f"unsupported lr_schedule {self.lr_schedule!r}")


def _resolve_model(config: TrainConfig, dataset: PairDataset, max_len: int):
    if is_scratch(config.base_model):
        vocab = WordVocab.build(dataset.examples_train)
        return build_scratch_model(config.base_model, len(vocab), max_len), WordEncoder(vocab)
    model, tokenizer = load_pretrained(config.base_model)
    model_limit = getattr(model.config, "max_position_embeddings", max_len)
    if max_len > model_limit:
        raise SidecarError(
            f"pair-file token budget {max_len} exceeds the base model's input "
            f"limit {model_limit}"
        )
    return model, HFEncoder(tokenizer)


def finetune(
    pairs_path: str | Path,
    config: TrainConfig,
    train_examples: list[PairExample] | None = None,
) -> Path:
    """Train on the pair file's train split and write a checkpoint directory.

    `train_examples` substitutes the training subset (used by learning-curve
    runs); the pair file still provides the budget and evaluation split.
    """
    config.validate()
    dataset = load_pair_file(pairs_path)
    examples = train_examples if train_examples is not None else dataset.examples_train
    if not examples:
        raise SidecarError("training set is empty")
    max_len = config.max_len or dataset.budget

    torch.manual_seed(config.seed)
    model, encoder = _resolve_model(config, dataset, max_len)
    optimizer = torch.optim.Adam(
        model.parameters(), lr=config.learning_rate, weight_decay=config.weight_decay)
    steps_total = config.epochs * ((len(examples) + config.batch_size - 1) // config.batch_size)
    if config.lr_schedule == "linear":
        scheduler = torch.optim.lr_scheduler.LambdaLR(
            optimizer, lambda step: max(0.02, 1.0 - step / steps_total))
    else:
        scheduler = None

    checkpoint = Path(config.checkpoint)
    checkpoint.mkdir(parents=True, exist_ok=True)
    log_path = checkpoint / "training_log.jsonl"
    step = 0
    with log_path.open("w", encoding="utf-8") as log:
        for epoch in range(config.epochs):
            model.train()
            order = list(range(len(examples)))
            random.Random(config.seed * 100_003 + epoch).shuffle(order)
            for start in range(0, len(order), config.batch_size):
                chunk = [examples[i] for i in order[start : start + config.batch_size]]
                sequences = [
                    encoder.encode_pair(e.left_text, e.right_text, max_len) for e in chunk
                ]
                input_ids, mask = batch_tensors(sequences, encoder.pad_id)
                labels = torch.tensor([e.label for e in chunk])
                loss = model(input_ids=input_ids, attention_mask=mask, labels=labels).loss
                loss.backward()
                if config.grad_clip:
                    torch.nn.utils.clip_grad_norm_(model.parameters(), config.grad_clip)
                optimizer.step()
                if scheduler is not None:
                    scheduler.step()
                optimizer.zero_grad()
                step += 1
                log.write(json.dumps(
                    {"step": step, "epoch": epoch, "loss": round(loss.item(), 6)}) + "\n")
    save_checkpoint(checkpoint, model, encoder, config.base_model, max_len, asdict(config))
    return checkpoint


def read_training_log(checkpoint: str | Path) -> list[dict]:
    log_path = Path(checkpoint) / "training_log.jsonl"
    return [json.loads(line) for line in log_path.read_text(encoding="utf-8").splitlines()]

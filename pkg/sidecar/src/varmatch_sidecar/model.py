"""Encoder construction, checkpoint layout, and batch scoring.

Base models come in two flavors:

  * ``scratch:tiny`` / ``scratch:small`` — randomly initialized compact
    bidirectional encoders with a word-level vocabulary built from the
    training file. These train in minutes on one CPU and need no downloads.
  * any other identifier — resolved through AutoTokenizer /
    AutoModelForSequenceClassification (hub id or local path), for
    environments where pretrained checkpoints are available.

Checkpoint directory layout:

    model/             weights + model config (save_pretrained)
    vocab.json         word vocabulary (scratch presets only)
    sidecar.json       tokenizer kind, base model, max_len, train config,
                       weight digest
    training_log.jsonl one {"step", "epoch", "loss"} record per step
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import torch
from transformers import DistilBertConfig, DistilBertForSequenceClassification

from .data import PairExample, SidecarError, WordVocab

SCRATCH_PRESETS = {
    "scratch:tiny": dict(dim=128, n_layers=2, n_heads=4, hidden_dim=512),
    "scratch:small": dict(dim=192, n_layers=3, n_heads=6, hidden_dim=768),
}
SCRATCH_INPUT_LIMIT = 512


def is_scratch(base_model: str) -> bool:
    return base_model.startswith("scratch:")


def build_scratch_model(base_model: str, vocab_size: int, max_len: int):
    preset = SCRATCH_PRESETS.get(base_model)
    if preset is None:
        raise SidecarError(
            f"unknown scratch preset {base_model!r}; options: {sorted(SCRATCH_PRESETS)}"
        )
    if max_len > SCRATCH_INPUT_LIMIT:
        raise SidecarError(
            f"pair-file token budget {max_len} exceeds the scratch input "
            f"limit {SCRATCH_INPUT_LIMIT}"
        )
    config = DistilBertConfig(
        vocab_size=vocab_size,
        max_position_embeddings=max_len,
        pad_token_id=WordVocab.PAD_ID,
        num_labels=2,
        **preset,
    )
    return DistilBertForSequenceClassification(config)


def load_pretrained(base_model: str):
    from transformers import AutoModelForSequenceClassification, AutoTokenizer

    tokenizer = AutoTokenizer.from_pretrained(base_model)
    model = AutoModelForSequenceClassification.from_pretrained(base_model, num_labels=2)
    return model, tokenizer


class HFEncoder:
    """Pair encoder over a pretrained subword tokenizer."""

    kind = "hf"

    def __init__(self, tokenizer):
        self.tokenizer = tokenizer
        self.pad_id = tokenizer.pad_token_id

    def encode_pair(self, left: str, right: str, max_len: int) -> list[int]:
        cap = (max_len - 3) // 2
        left_ids = self.tokenizer.encode(left, add_special_tokens=False)[:cap]
        right_ids = self.tokenizer.encode(right, add_special_tokens=False)[:cap]
        cls_id = self.tokenizer.cls_token_id
        sep_id = self.tokenizer.sep_token_id
        return [cls_id] + left_ids + [sep_id] + right_ids + [sep_id]


class WordEncoder:
    """Pair encoder over the scratch word vocabulary."""

    kind = "word"

    def __init__(self, vocab: WordVocab):
        self.vocab = vocab
        self.pad_id = WordVocab.PAD_ID

    def encode_pair(self, left: str, right: str, max_len: int) -> list[int]:
        return self.vocab.encode_pair(left, right, max_len)


def batch_tensors(sequences: list[list[int]], pad_id: int):
    width = max(len(s) for s in sequences)
    input_ids = torch.tensor([s + [pad_id] * (width - len(s)) for s in sequences])
    mask = torch.tensor([[1] * len(s) + [0] * (width - len(s)) for s in sequences])
    return input_ids, mask


def weights_digest(model) -> str:
    hasher = hashlib.sha256()
    for name, tensor in sorted(model.state_dict().items()):
        hasher.update(name.encode())
        hasher.update(tensor.detach().cpu().numpy().tobytes())
    return hasher.hexdigest()[:16]


def save_checkpoint(path: str | Path, model, encoder, base_model: str,
                    max_len: int, train_config: dict) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    model.save_pretrained(path / "model")
    if encoder.kind == "word":
        encoder.vocab.save(path / "vocab.json")
    else:
        encoder.tokenizer.save_pretrained(path / "tokenizer")
    manifest = {
        "tokenizer": encoder.kind,
        "base_model": base_model,
        "max_len": max_len,
        "train_config": train_config,
        "model_digest": weights_digest(model),
    }
    (path / "sidecar.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


class PairScorer:
    """Loads a checkpoint and scores text pairs in batches."""

    def __init__(self, checkpoint: str | Path):
        checkpoint = Path(checkpoint)
        manifest_path = checkpoint / "sidecar.json"
        if not manifest_path.exists():
            raise SidecarError(f"{checkpoint} is not a sidecar checkpoint (no sidecar.json)")
        self.manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        self.max_len = int(self.manifest["max_len"])
        self.model = DistilBertForSequenceClassification.from_pretrained(checkpoint / "model")
        self.model.eval()
        if self.manifest["tokenizer"] == "word":
            self.encoder = WordEncoder(WordVocab.load(checkpoint / "vocab.json"))
        else:
            from transformers import AutoTokenizer

            self.encoder = HFEncoder(AutoTokenizer.from_pretrained(checkpoint / "tokenizer"))

    @property
    def model_digest(self) -> str:
        return self.manifest.get("model_digest", "")

    def score_texts(self, pairs: list[tuple[str, str]], batch_size: int = 128) -> list[float]:
        scores: list[float] = []
        with torch.no_grad():
            for start in range(0, len(pairs), batch_size):
                chunk = pairs[start : start + batch_size]
                sequences = [
                    self.encoder.encode_pair(left, right, self.max_len)
                    for left, right in chunk
                ]
                input_ids, mask = batch_tensors(sequences, self.encoder.pad_id)
                logits = self.model(input_ids=input_ids, attention_mask=mask).logits
                scores.extend(torch.softmax(logits, dim=-1)[:, 1].tolist())
        return scores

    def score_examples(self, examples: list[PairExample], batch_size: int = 128) -> list[float]:
        return self.score_texts(
            [(e.left_text, e.right_text) for e in examples], batch_size=batch_size)

"""Reading exported pair files and turning pairs into model inputs.

The sidecar consumes the pair-file format produced by `varmatch pairs`: one
{"record": "meta", ...} line followed by {"record": "pair", ...} records. It
re-tokenizes the raw per-side text itself (the exported token field is
advisory, for budget accounting); when a record or wire pair carries no raw
text, the sides are reconstructed from the token sequence by splitting at the
separator symbols.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

BOS = "[BOS]"
SEP = "[SEP]"
PAD = "[PAD]"

LABEL_POSITIVE = "variant_match"

_TOKEN = re.compile(r"[\w']+")


class SidecarError(Exception):
    pass


def word_tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


@dataclass(frozen=True)
class PairExample:
    left_text: str
    right_text: str
    label: int  # 1 = variant_match, 0 = mismatch
    left_id: str = ""
    right_id: str = ""


@dataclass
class PairDataset:
    budget: int
    examples_train: list[PairExample]
    examples_eval: list[PairExample]
    meta: dict


def texts_from_tokens(tokens: list[str]) -> tuple[str, str]:
    """Recover left/right text from a serialized token sequence."""
    content = [t for t in tokens if t not in (BOS, PAD)]
    if SEP not in content:
        return " ".join(content), ""
    cut = content.index(SEP)
    left = content[:cut]
    right = [t for t in content[cut + 1 :] if t != SEP]
    return " ".join(left), " ".join(right)


def pair_texts(record: dict) -> tuple[str, str]:
    left = record.get("left_text")
    right = record.get("right_text")
    if isinstance(left, str) and isinstance(right, str) and (left or right):
        return left, right
    tokens = record.get("tokens")
    if isinstance(tokens, list):
        return texts_from_tokens([str(t) for t in tokens])
    raise SidecarError("pair carries neither raw text nor a token sequence")


def load_pair_file(path: str | Path) -> PairDataset:
    """Parse an exported pair file into train/eval text examples."""
    path = Path(path)
    meta: dict | None = None
    train: list[PairExample] = []
    eval_: list[PairExample] = []
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            kind = obj.get("record")
            if kind == "meta":
                if meta is None:
                    meta = obj
                continue
            if kind != "pair":
                raise SidecarError(f"{path}:{lineno}: unexpected record {kind!r}")
            left, right = pair_texts(obj)
            example = PairExample(
                left_text=left,
                right_text=right,
                label=1 if obj.get("label") == LABEL_POSITIVE else 0,
                left_id=str(obj.get("left_id", "")),
                right_id=str(obj.get("right_id", "")),
            )
            if obj.get("split") == "eval":
                eval_.append(example)
            else:
                train.append(example)
    if meta is None:
        raise SidecarError(f"{path}: missing metadata record")
    budget = int(meta.get("budget", 512))
    return PairDataset(budget=budget, examples_train=train, examples_eval=eval_, meta=meta)


class WordVocab:
    """Word-level vocabulary for the from-scratch encoder presets."""

    PAD_ID, CLS_ID, SEP_ID, UNK_ID = 0, 1, 2, 3
    SPECIALS = ("[PAD]", "[CLS]", "[SEP]", "[UNK]")

    def __init__(self, tokens: list[str]):
        self.token_to_id: dict[str, int] = {t: i for i, t in enumerate(self.SPECIALS)}
        for token in tokens:
            if token not in self.token_to_id:
                self.token_to_id[token] = len(self.token_to_id)

    @classmethod
    def build(cls, examples: list[PairExample]) -> "WordVocab":
        seen: dict[str, None] = {}
        for example in examples:
            for text in (example.left_text, example.right_text):
                for token in word_tokenize(text):
                    seen.setdefault(token)
        return cls(list(seen))

    @classmethod
    def load(cls, path: str | Path) -> "WordVocab":
        mapping = json.loads(Path(path).read_text(encoding="utf-8"))
        vocab = cls([])
        vocab.token_to_id = {str(k): int(v) for k, v in mapping.items()}
        return vocab

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.token_to_id, ensure_ascii=False, indent=0) + "\n",
            encoding="utf-8",
        )

    def __len__(self) -> int:
        return len(self.token_to_id)

    def encode_text(self, text: str) -> list[int]:
        return [self.token_to_id.get(t, self.UNK_ID) for t in word_tokenize(text)]

    def encode_pair(self, left: str, right: str, max_len: int) -> list[int]:
        """[CLS] left [SEP] right [SEP], each side capped at half the budget."""
        cap = (max_len - 3) // 2
        return (
            [self.CLS_ID]
            + self.encode_text(left)[:cap]
            + [self.SEP_ID]
            + self.encode_text(right)[:cap]
            + [self.SEP_ID]
        )

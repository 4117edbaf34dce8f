"""Attribute-name normalization and the default whitespace/punctuation tokenizer.

One normalization rule is applied everywhere attribute names are compared
(catalog ingest, heuristic labels, recall scoring, parsed model output) so
that "Keyboard switch", "keyboard  switch" and "keyboard_switch" all denote
the same attribute.
"""

from __future__ import annotations

import re
from typing import Protocol

_WS = re.compile(r"\s+")
# word characters plus a few symbols that carry meaning inside product values
_TOKEN = re.compile(r"[\w']+")


def normalize_key(raw: str) -> str:
    """Lowercase an attribute name and collapse internal whitespace to '_'."""
    return _WS.sub("_", raw.strip().lower())


def normalize_value(raw: str) -> str:
    """Casefold a value and collapse runs of whitespace to a single space."""
    return _WS.sub(" ", raw.strip().casefold())


class Tokenizer(Protocol):
    """Deterministic text tokenizer used for pair serialization and budgets."""

    tokenizer_id: str

    def tokenize(self, text: str) -> list[str]: ...


class SimpleTokenizer:
    """Lowercase tokenizer splitting on whitespace and punctuation.

    Deliberately model-free: it only has to be deterministic and stable so
    exported token sequences are reproducible. A subword tokenizer satisfying
    the same protocol can be substituted to match a specific encoder.
    """

    tokenizer_id = "simple-v1"

    def tokenize(self, text: str) -> list[str]:
        return _TOKEN.findall(text.lower())


DEFAULT_TOKENIZER = SimpleTokenizer()

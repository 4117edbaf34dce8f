"""Variant-match scoring backends behind one classifier contract.

Four handle kinds implement `score_batch`:

    baseline    deterministic token-overlap score, no model required
    oracle      truth table from known group membership (testing backend)
    remote      HTTP scorer speaking the shared pair-scoring wire protocol
    generative  HTTP completion endpoint driven by the matching prompt

Wire protocol, scoring: POST {"pairs": [{"tokens": [...]}, ...]} returns
{"scores": [p, ...]} with one probability in [0, 1] per pair, same order.
Wire protocol, completion: POST {"prompt": text, "params": {...}} returns
{"completion": text}.
"""

from __future__ import annotations

import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from typing import Mapping, Sequence

import requests

from .catalog import CatalogStore, Product, render_product_block
from .errors import DataError, ResponseParseError, TransportError
from .normalize import DEFAULT_TOKENIZER, Tokenizer
from .pairforge import MISMATCH, VARIANT_MATCH, serialize_pair

MATCH_TEMPLATE = "match_v1.txt"


@dataclass
class MatchScore:
    probability: float
    source: str
    degenerate: bool = False

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0:
            raise DataError(f"probability out of range: {self.probability}")


@dataclass
class MatchVerdict:
    label: str
    similarity: float
    score_defaulted: bool = False


@dataclass(frozen=True)
class GenParams:
    """Text-generation parameter set sent verbatim to completion endpoints."""

    max_tokens: int
    temperature: float
    top_k: int | None = None
    top_p: float | None = None

    def to_wire(self) -> dict:
        return {
            "max_tokens": self.max_tokens,
            "temperature": self.temperature,
            "top_k": self.top_k,
            "top_p": self.top_p,
        }


# defaults for the two generative tasks
MATCH_GEN_PARAMS = GenParams(max_tokens=30, temperature=0.0, top_k=100)
ATTR_GEN_PARAMS = GenParams(max_tokens=500, temperature=0.0, top_p=0.9)


def load_template(name: str) -> str:
    text = resources.files("varmatch.prompts").joinpath(name).read_text(encoding="utf-8")
    return text.rstrip("\n")


def build_match_prompt(left: Product, right: Product) -> str:
    """Fill the matching prompt template with both products' attribute blocks."""
    template = load_template(MATCH_TEMPLATE)
    prompt = template.replace("{product 1}", render_product_block(left, 1))
    return prompt.replace("{product 2}", render_product_block(right, 2))


_VERDICT_TOKEN = re.compile(r"^\s*([A-Za-z]+)")
_DECIMAL = re.compile(r"\d*\.?\d+")


def parse_match_response(text: str) -> MatchVerdict:
    """Read a yes/no verdict plus similarity score out of a completion.

    The leading token decides the verdict; the first decimal literal in [0, 1]
    after it becomes the similarity. A missing score falls back to 1.0 for yes
    and 0.0 for no, with `score_defaulted` set.
    """
    match = _VERDICT_TOKEN.match(text)
    token = match.group(1).lower() if match else ""
    if token not in ("yes", "no"):
        raise ResponseParseError("expected a leading yes/no verdict", raw=text)
    label = VARIANT_MATCH if token == "yes" else MISMATCH
    for literal in _DECIMAL.finditer(text, match.end()):
        value = float(literal.group(0))
        if value <= 1.0:
            return MatchVerdict(label=label, similarity=value)
    return MatchVerdict(
        label=label,
        similarity=1.0 if label == VARIANT_MATCH else 0.0,
        score_defaulted=True,
    )


def classify(score: MatchScore, threshold: float = 0.5) -> MatchVerdict:
    """Threshold a probability into a verdict (variant_match when >= threshold)."""
    if not 0.0 <= threshold <= 1.0:
        raise DataError(f"threshold must lie in [0, 1], got {threshold}")
    label = VARIANT_MATCH if score.probability >= threshold else MISMATCH
    return MatchVerdict(label=label, similarity=score.probability)


def attribute_token_pairs(product: Product, tokenizer: Tokenizer = DEFAULT_TOKENIZER) -> frozenset:
    return frozenset(
        (key, token)
        for key, value in product.attributes
        for token in tokenizer.tokenize(value)
    )


def baseline_score(
    left: Product, right: Product, tokenizer: Tokenizer = DEFAULT_TOKENIZER
) -> float:
    """Jaccard similarity of the two products' (key, value-token) sets.

    Symmetric; 1.0 exactly when the sets are equal and non-empty, 0.0 when
    disjoint (including the degenerate attribute-free case).
    """
    a = attribute_token_pairs(left, tokenizer)
    b = attribute_token_pairs(right, tokenizer)
    if not a and not b:
        return 0.0
    return len(a & b) / len(a | b)


class ClassifierHandle:
    """Contract shared by every scoring backend."""

    kind: str = "abstract"

    def score_batch(self, pairs: Sequence[tuple[Product, Product]]) -> list[MatchScore]:
        raise NotImplementedError


def score_pair(handle: ClassifierHandle, left: Product, right: Product) -> MatchScore:
    return handle.score_batch([(left, right)])[0]


class BaselineHandle(ClassifierHandle):
    kind = "baseline"

    def __init__(self, tokenizer: Tokenizer = DEFAULT_TOKENIZER):
        self.tokenizer = tokenizer

    def score_batch(self, pairs: Sequence[tuple[Product, Product]]) -> list[MatchScore]:
        out = []
        for left, right in pairs:
            degenerate = not left.attributes and not right.attributes
            out.append(
                MatchScore(
                    probability=baseline_score(left, right, self.tokenizer),
                    source=self.kind,
                    degenerate=degenerate,
                )
            )
        return out


class OracleHandle(ClassifierHandle):
    """Scores 1.0 for same-group pairs and 0.0 otherwise (synthetic gold)."""

    kind = "oracle"

    def __init__(self, group_of: Mapping[str, str]):
        self.group_of = dict(group_of)

    @classmethod
    def from_store(cls, store: CatalogStore) -> "OracleHandle":
        return cls(store.group_of)

    def score_batch(self, pairs: Sequence[tuple[Product, Product]]) -> list[MatchScore]:
        out = []
        for left, right in pairs:
            a = self.group_of.get(left.product_id)
            b = self.group_of.get(right.product_id)
            matched = a is not None and a == b and left.product_id != right.product_id
            out.append(MatchScore(probability=1.0 if matched else 0.0, source=self.kind))
        return out


@dataclass(frozen=True)
class EndpointConfig:
    """HTTP endpoint descriptor with retry and concurrency policy."""

    url: str
    timeout: float = 30.0
    max_attempts: int = 3
    backoff: float = 0.5
    concurrency: int = 8

    def validate(self) -> None:
        if not self.url.startswith(("http://", "https://")):
            raise DataError(f"endpoint url must be http(s), got {self.url!r}")
        if self.max_attempts < 1 or self.concurrency < 1:
            raise DataError("max_attempts and concurrency must be >= 1")


def _post_json(endpoint: EndpointConfig, payload: dict) -> dict:
    """POST with capped exponential retry; non-JSON or 4xx responses are parse errors."""
    last_error: Exception | None = None
    for attempt in range(1, endpoint.max_attempts + 1):
        try:
            response = requests.post(endpoint.url, json=payload, timeout=endpoint.timeout)
        except requests.RequestException as exc:
            last_error = exc
        else:
            if response.status_code >= 500:
                last_error = TransportError(
                    f"server error {response.status_code} from {endpoint.url}", attempt
                )
            elif response.status_code >= 400:
                raise ResponseParseError(
                    f"endpoint rejected request with status {response.status_code}",
                    raw=response.text,
                )
            else:
                try:
                    return response.json()
                except ValueError:
                    raise ResponseParseError("endpoint returned non-JSON body", raw=response.text)
        if attempt < endpoint.max_attempts:
            time.sleep(endpoint.backoff * (2 ** (attempt - 1)))
    raise TransportError(f"request to {endpoint.url} failed: {last_error}", endpoint.max_attempts)


class RemoteHandle(ClassifierHandle):
    """Client for a remote pair scorer speaking the shared wire protocol."""

    kind = "remote"

    def __init__(
        self,
        endpoint: EndpointConfig | str,
        tokenizer: Tokenizer = DEFAULT_TOKENIZER,
        budget: int = 512,
        batch_size: int = 64,
    ):
        self.endpoint = EndpointConfig(endpoint) if isinstance(endpoint, str) else endpoint
        self.endpoint.validate()
        self.tokenizer = tokenizer
        self.budget = budget
        self.batch_size = batch_size

    def score_batch(self, pairs: Sequence[tuple[Product, Product]]) -> list[MatchScore]:
        wire_pairs = [self._wire_pair(left, right) for left, right in pairs]
        return self.score_wire(wire_pairs)

    def score_wire(self, wire_pairs: Sequence[dict]) -> list[MatchScore]:
        """Score pre-built wire pair objects ({"tokens": [...], ...})."""
        chunks = [
            list(wire_pairs[i : i + self.batch_size])
            for i in range(0, len(wire_pairs), self.batch_size)
        ] or [[]]
        if len(chunks) == 1:
            score_lists = [self._score_chunk(chunks[0])]
        else:
            with ThreadPoolExecutor(max_workers=self.endpoint.concurrency) as pool:
                score_lists = list(pool.map(self._score_chunk, chunks))
        return [
            MatchScore(probability=value, source=self.kind)
            for chunk_scores in score_lists
            for value in chunk_scores
        ]

    def _wire_pair(self, left: Product, right: Product) -> dict:
        from .pairforge import attributes_text

        serialized = serialize_pair(left, right, self.tokenizer, self.budget)
        return {
            "tokens": list(serialized.tokens),
            "left_text": attributes_text(left),
            "right_text": attributes_text(right),
        }

    def _score_chunk(self, chunk: list[dict]) -> list[float]:
        body = _post_json(self.endpoint, {"pairs": chunk})
        scores = body.get("scores")
        if not isinstance(scores, list) or len(scores) != len(chunk):
            raise ResponseParseError(
                f"expected {len(chunk)} scores, got {scores!r:.100}", raw=str(body)
            )
        for value in scores:
            if not isinstance(value, (int, float)) or not 0.0 <= float(value) <= 1.0:
                raise ResponseParseError(f"score out of range: {value!r}", raw=str(body))
        return [float(v) for v in scores]


class GenerativeHandle(ClassifierHandle):
    """Zero-shot matcher backed by a text-completion endpoint."""

    kind = "generative"

    def __init__(
        self,
        endpoint: EndpointConfig | str,
        params: GenParams = MATCH_GEN_PARAMS,
    ):
        self.endpoint = EndpointConfig(endpoint) if isinstance(endpoint, str) else endpoint
        self.endpoint.validate()
        self.params = params

    def complete(self, prompt: str, params: GenParams | None = None) -> str:
        body = _post_json(
            self.endpoint,
            {"prompt": prompt, "params": (params or self.params).to_wire()},
        )
        completion = body.get("completion")
        if not isinstance(completion, str):
            raise ResponseParseError("response lacks a 'completion' string", raw=str(body))
        return completion

    def verdict_pair(self, left: Product, right: Product) -> MatchVerdict:
        return parse_match_response(self.complete(build_match_prompt(left, right)))

    def score_batch(self, pairs: Sequence[tuple[Product, Product]]) -> list[MatchScore]:
        def one(pair: tuple[Product, Product]) -> MatchScore:
            verdict = self.verdict_pair(*pair)
            return MatchScore(probability=verdict.similarity, source=self.kind)

        if len(pairs) <= 1:
            return [one(pair) for pair in pairs]
        with ThreadPoolExecutor(max_workers=self.endpoint.concurrency) as pool:
            return list(pool.map(one, pairs))


def check_scoring_endpoint(url: str, timeout: float = 10.0) -> list[str]:
    """Conformance probe for scorers implementing the wire protocol.

    Verifies batch length/order/range behavior, determinism, empty-batch
    handling and structured rejection of malformed requests. Returns the list
    of passed check names; raises on the first violation.
    """
    endpoint = EndpointConfig(url, timeout=timeout, max_attempts=1)
    handle = RemoteHandle(endpoint)
    passed: list[str] = []

    empty = handle.score_wire([])
    if empty != []:
        raise ResponseParseError("empty batch must yield empty scores", raw=repr(empty))
    passed.append("empty_batch")

    wire = [
        {"tokens": ["[BOS]", "alpha", "beta", "[SEP]", "alpha", "beta", "[SEP]"]},
        {"tokens": ["[BOS]", "alpha", "beta", "[SEP]", "gamma", "delta", "[SEP]"]},
    ]
    first = [s.probability for s in handle.score_wire(wire)]
    if len(first) != 2:
        raise ResponseParseError("batch of 2 must yield 2 scores", raw=repr(first))
    passed.append("length_and_range")

    again = [s.probability for s in handle.score_wire(wire)]
    if again != first:
        raise ResponseParseError("scores must be deterministic", raw=repr((first, again)))
    passed.append("deterministic")

    flipped = [s.probability for s in handle.score_wire(list(reversed(wire)))]
    if flipped != list(reversed(first)):
        raise ResponseParseError("scores must follow input order", raw=repr((first, flipped)))
    passed.append("order_preserved")

    response = requests.post(endpoint.url, json={"not_pairs": True}, timeout=timeout)
    if response.status_code < 400 or "error" not in response.text.lower():
        raise ResponseParseError(
            "malformed request must produce a structured protocol error",
            raw=f"status={response.status_code} body={response.text[:200]}",
        )
    passed.append("malformed_request_rejected")

    if handle.score_wire([]) != []:
        raise ResponseParseError("server did not survive a malformed request", raw="")
    passed.append("survives_malformed_request")
    return passed

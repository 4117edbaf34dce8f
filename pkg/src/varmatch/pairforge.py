"""Labeled pair dataset construction from a catalog store.

Positive pairs are all unordered within-group pairs. Negatives are sampled
into difficulty buckets defined directly against the catalog:

    hard    same brand and same product_type, different variation groups
    medium  same product_type, different brand
    easy    different product_type and different brand
    random  any pair from different variation groups (control condition)

A missing brand or product_type never counts as equal to anything, so a pair
with a missing brand cannot qualify as "same brand". Splitting is done at the
variation-group level: negatives follow their endpoint groups and are dropped
(and counted) when the endpoints land in different splits, after which each
split is trimmed to balanced class labels.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .catalog import CatalogStore, Product
from .errors import DataError, PoolExhaustedError
from .normalize import DEFAULT_TOKENIZER, Tokenizer

VARIANT_MATCH = "variant_match"
MISMATCH = "mismatch"

BUCKET_POSITIVE = "positive"
BUCKET_HARD = "hard"
BUCKET_MEDIUM = "medium"
BUCKET_EASY = "easy"
BUCKET_RANDOM = "random"

BOS = "[BOS]"
SEP = "[SEP]"
PAD = "[PAD]"

_SOLO_PREFIX = "solo::"


@dataclass(frozen=True)
class LabeledPair:
    """An unordered product pair stored canonically (smaller id first)."""

    left_id: str
    right_id: str
    label: str
    bucket: str
    origin_group: str | None = None
    left_group: str | None = None
    right_group: str | None = None

    def __post_init__(self):
        if self.left_id == self.right_id:
            raise DataError(f"pair has identical ids: {self.left_id!r}")
        if self.left_id > self.right_id:
            raise DataError("pair ids must be in canonical (sorted) order")
        if (self.label == VARIANT_MATCH) != (self.bucket == BUCKET_POSITIVE):
            raise DataError("label variant_match <=> bucket positive")

    @classmethod
    def make(
        cls,
        a: str,
        b: str,
        label: str,
        bucket: str,
        origin_group: str | None = None,
        a_group: str | None = None,
        b_group: str | None = None,
    ) -> "LabeledPair":
        if a > b:
            a, b = b, a
            a_group, b_group = b_group, a_group
        return cls(a, b, label, bucket, origin_group, a_group, b_group)

    def key(self) -> tuple[str, str]:
        return (self.left_id, self.right_id)


@dataclass(frozen=True)
class NegativeMix:
    """Requested bucket fractions; must be non-negative and sum to 1."""

    hard: float = 1 / 3
    medium: float = 1 / 3
    easy: float = 1 / 3

    def validate(self) -> None:
        values = (self.hard, self.medium, self.easy)
        if any(v < 0 for v in values) or abs(sum(values) - 1.0) > 1e-9:
            raise DataError("mix fractions must be >= 0 and sum to 1")

    def bucket_counts(self, count: int) -> dict[str, int]:
        """Per-bucket counts: round(count * fraction), remainder to hard."""
        counts = {
            BUCKET_HARD: _half_up(count * self.hard),
            BUCKET_MEDIUM: _half_up(count * self.medium),
            BUCKET_EASY: _half_up(count * self.easy),
        }
        counts[BUCKET_HARD] += count - sum(counts.values())
        # a negative remainder can push hard below zero; spill in difficulty order
        for bucket, nxt in ((BUCKET_HARD, BUCKET_MEDIUM), (BUCKET_MEDIUM, BUCKET_EASY)):
            if counts[bucket] < 0:
                counts[nxt] += counts[bucket]
                counts[bucket] = 0
        return counts


def _half_up(x: float) -> int:
    return int(x + 0.5)


def extract_positive_pairs(store: CatalogStore) -> list[LabeledPair]:
    """All unordered within-group pairs, sorted by group id then pair ids."""
    pairs: list[LabeledPair] = []
    for group_id in sorted(store.groups):
        members = sorted(store.groups[group_id].member_ids)
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                pairs.append(
                    LabeledPair.make(
                        members[i],
                        members[j],
                        VARIANT_MATCH,
                        BUCKET_POSITIVE,
                        origin_group=group_id,
                        a_group=group_id,
                        b_group=group_id,
                    )
                )
    return pairs


def same_brand(a: Product, b: Product) -> bool:
    return a.brand is not None and b.brand is not None and a.brand == b.brand


def same_type(a: Product, b: Product) -> bool:
    return (
        a.product_type is not None
        and b.product_type is not None
        and a.product_type == b.product_type
    )


def bucket_predicate(bucket: str, a: Product, b: Product, store: CatalogStore) -> bool:
    """Evaluate a negative bucket's membership rule directly against the catalog."""
    group_a = store.group_of.get(a.product_id)
    group_b = store.group_of.get(b.product_id)
    different_groups = group_a is None or group_b is None or group_a != group_b
    if a.product_id == b.product_id or not different_groups:
        return False
    if bucket == BUCKET_HARD:
        return same_brand(a, b) and same_type(a, b)
    if bucket == BUCKET_MEDIUM:
        return same_type(a, b) and not same_brand(a, b)
    if bucket == BUCKET_EASY:
        return not same_type(a, b) and not same_brand(a, b)
    if bucket == BUCKET_RANDOM:
        return True
    raise DataError(f"unknown bucket {bucket!r}")


def _make_negative(store: CatalogStore, a: str, b: str, bucket: str) -> LabeledPair:
    return LabeledPair.make(
        a,
        b,
        MISMATCH,
        bucket,
        a_group=store.group_of.get(a),
        b_group=store.group_of.get(b),
    )


class _BucketSampler:
    """Rejection sampler with an exhaustive-enumeration fallback."""

    # consecutive rejected draws before switching to full enumeration
    STALL_LIMIT = 500

    def __init__(self, store: CatalogStore, bucket: str, rng: random.Random):
        self.store = store
        self.bucket = bucket
        self.rng = rng
        self.all_ids = sorted(store.products)
        self.left_pool = self._left_pool()

    def _left_pool(self) -> list[str]:
        products = self.store.products
        if self.bucket == BUCKET_HARD:
            return sorted(
                pid
                for pid, p in products.items()
                if p.brand is not None and p.product_type is not None
            )
        if self.bucket == BUCKET_MEDIUM:
            return sorted(pid for pid, p in products.items() if p.product_type is not None)
        return list(self.all_ids)

    def _right_pool(self, left: Product) -> list[str]:
        if self.bucket == BUCKET_HARD:
            return sorted(self.store.index_brand_type.get((left.brand, left.product_type), ()))
        return self.all_ids

    def draw(self, n: int, used: set[tuple[str, str]]) -> list[tuple[str, str]]:
        """Draw n distinct qualifying pairs, updating `used` in place."""
        out: list[tuple[str, str]] = []
        if n == 0:
            return out
        if not self.left_pool:
            raise PoolExhaustedError(self.bucket, n, 0)
        stalls = 0
        while len(out) < n:
            if stalls >= self.STALL_LIMIT:
                out.extend(self._enumerate_remaining(n - len(out), used))
                break
            a_id = self.rng.choice(self.left_pool)
            a = self.store.products[a_id]
            right_pool = self._right_pool(a)
            if not right_pool:
                stalls += 1
                continue
            b_id = self.rng.choice(right_pool)
            b = self.store.products[b_id]
            key = (a_id, b_id) if a_id < b_id else (b_id, a_id)
            if key in used or not bucket_predicate(self.bucket, a, b, self.store):
                stalls += 1
                continue
            used.add(key)
            out.append(key)
            stalls = 0
        return out

    def _enumerate_remaining(
        self, n: int, used: set[tuple[str, str]]
    ) -> list[tuple[str, str]]:
        products = self.store.products
        pool: list[tuple[str, str]] = []
        for i, a_id in enumerate(self.all_ids):
            a = products[a_id]
            for b_id in self.all_ids[i + 1 :]:
                key = (a_id, b_id)
                if key in used:
                    continue
                if bucket_predicate(self.bucket, a, products[b_id], self.store):
                    pool.append(key)
        if len(pool) < n:
            raise PoolExhaustedError(self.bucket, n, len(pool))
        chosen = self.rng.sample(pool, n)
        used.update(chosen)
        return chosen


def sample_negatives(
    store: CatalogStore,
    positives: list[LabeledPair],
    mix: NegativeMix,
    count: int,
    seed: int,
) -> list[LabeledPair]:
    """Sample `count` informed negatives per the mix, deterministic under seed.

    Emitted pairs never duplicate a positive pair or each other; a bucket whose
    candidate pool cannot supply its share raises PoolExhaustedError rather
    than substituting from another bucket.
    """
    mix.validate()
    if count < 0:
        raise DataError("count must be >= 0")
    rng = random.Random(seed)
    used: set[tuple[str, str]] = {p.key() for p in positives}
    counts = mix.bucket_counts(count)
    out: list[LabeledPair] = []
    for bucket in (BUCKET_HARD, BUCKET_MEDIUM, BUCKET_EASY):
        sampler = _BucketSampler(store, bucket, rng)
        for a, b in sampler.draw(counts[bucket], used):
            out.append(_make_negative(store, a, b, bucket))
    return out


def sample_random_negatives(
    store: CatalogStore,
    positives: list[LabeledPair],
    count: int,
    seed: int,
) -> list[LabeledPair]:
    """Uniform cross-group negatives (the uninformed control strategy)."""
    if count < 0:
        raise DataError("count must be >= 0")
    rng = random.Random(seed)
    used: set[tuple[str, str]] = {p.key() for p in positives}
    sampler = _BucketSampler(store, BUCKET_RANDOM, rng)
    return [_make_negative(store, a, b, BUCKET_RANDOM) for a, b in sampler.draw(count, used)]


@dataclass
class SplitReport:
    """What the splitter kept, dropped and trimmed."""

    train_groups: int = 0
    eval_groups: int = 0
    dropped_cross_split: int = 0
    trimmed_train: int = 0
    trimmed_eval: int = 0

    def summary(self) -> str:
        return (
            f"groups train/eval={self.train_groups}/{self.eval_groups} "
            f"dropped_cross_split={self.dropped_cross_split} "
            f"trimmed train/eval={self.trimmed_train}/{self.trimmed_eval}"
        )


@dataclass
class DatasetSplit:
    train: list[LabeledPair]
    eval: list[LabeledPair]
    seed: int
    ratio: float
    report: SplitReport = field(default_factory=SplitReport)

    def train_fraction(self) -> float:
        total = len(self.train) + len(self.eval)
        return len(self.train) / total if total else 0.0


def _pair_groups(pair: LabeledPair) -> tuple[str, str]:
    if pair.label == VARIANT_MATCH:
        if pair.origin_group is None:
            raise DataError(f"positive pair {pair.key()} lacks origin_group")
        return (pair.origin_group, pair.origin_group)
    left = pair.left_group or f"{_SOLO_PREFIX}{pair.left_id}"
    right = pair.right_group or f"{_SOLO_PREFIX}{pair.right_id}"
    return (left, right)


class _SplitState:
    """Group assignment with incremental evaluation of the split objective.

    The objective is computed on the post-balancing sizes: after the final
    trim each side holds 2*min(pos, neg) pairs (when both labels are present),
    and we want the train share of those pairs to sit at the requested ratio.
    """

    def __init__(self, pairs: list[LabeledPair], ratio: float, rng: random.Random):
        self.ratio = ratio
        self.pos_w: dict[str, int] = {}
        self.edges: list[tuple[str, str]] = []
        incident: dict[str, list[int]] = {}
        for pair in pairs:
            ga, gb = _pair_groups(pair)
            if pair.label == VARIANT_MATCH:
                self.pos_w[ga] = self.pos_w.get(ga, 0) + 1
                incident.setdefault(ga, [])
            else:
                index = len(self.edges)
                self.edges.append((ga, gb))
                incident.setdefault(ga, []).append(index)
                incident.setdefault(gb, []).append(index)
        self.incident = incident
        self.groups = sorted(incident)
        self.has_pos = bool(self.pos_w)
        self.has_neg = bool(self.edges)

        order = list(self.groups)
        rng.shuffle(order)
        weight = {
            g: self.pos_w.get(g, 0) + 0.5 * len(self.incident[g]) for g in self.groups
        }
        target = ratio * sum(weight.values())
        self.in_train: dict[str, bool] = {}
        acc = 0.0
        for g in order:
            self.in_train[g] = acc < target
            if self.in_train[g]:
                acc += weight[g]
        self.sweep_order = order

        self.pos_t = sum(w for g, w in self.pos_w.items() if self.in_train[g])
        self.pos_total = sum(self.pos_w.values())
        self.neg_tt = sum(
            1 for ga, gb in self.edges if self.in_train[ga] and self.in_train[gb]
        )
        self.neg_ee = sum(
            1 for ga, gb in self.edges if not self.in_train[ga] and not self.in_train[gb]
        )

    def _objective(self, pos_t: int, neg_tt: int, neg_ee: int) -> float:
        pos_e = self.pos_total - pos_t
        if self.has_pos and self.has_neg:
            train_size = 2 * min(pos_t, neg_tt)
            eval_size = 2 * min(pos_e, neg_ee)
        elif self.has_pos:
            train_size, eval_size = pos_t, pos_e
        else:
            train_size, eval_size = neg_tt, neg_ee
        total = train_size + eval_size
        if total == 0:
            return 1.0
        return abs(train_size / total - self.ratio)

    def _flip_delta(self, g: str) -> tuple[int, int, int]:
        to_eval = self.in_train[g]
        pos_t = self.pos_t - self.pos_w.get(g, 0) if to_eval else self.pos_t + self.pos_w.get(g, 0)
        neg_tt, neg_ee = self.neg_tt, self.neg_ee
        for edge_index in self.incident[g]:
            ga, gb = self.edges[edge_index]
            other = gb if ga == g else ga
            if other == g:  # self-loop cannot happen, groups differ for negatives
                continue
            other_train = self.in_train[other]
            if to_eval:
                if other_train:
                    neg_tt -= 1
                else:
                    neg_ee += 1
            else:
                if other_train:
                    neg_tt += 1
                else:
                    neg_ee -= 1
        return pos_t, neg_tt, neg_ee

    def improve(self, max_sweeps: int = 25) -> None:
        """First-improvement hill climbing on single-group flips."""
        current = self._objective(self.pos_t, self.neg_tt, self.neg_ee)
        for _ in range(max_sweeps):
            improved = False
            for g in self.sweep_order:
                pos_t, neg_tt, neg_ee = self._flip_delta(g)
                candidate = self._objective(pos_t, neg_tt, neg_ee)
                if candidate + 1e-12 < current:
                    self.in_train[g] = not self.in_train[g]
                    self.pos_t, self.neg_tt, self.neg_ee = pos_t, neg_tt, neg_ee
                    current = candidate
                    improved = True
            if not improved:
                break


def split_dataset(pairs: list[LabeledPair], ratio: float, seed: int) -> DatasetSplit:
    """Group-disjoint train/eval split with balanced class labels.

    The splitting unit is the variation group. Negatives whose endpoint groups
    land in different splits are discarded (and counted); the majority label in
    each split is then trimmed to balance. Deterministic under seed.
    """
    if not 0.0 < ratio < 1.0:
        raise DataError(f"ratio must lie in (0, 1), got {ratio}")
    rng = random.Random(seed)
    state = _SplitState(pairs, ratio, rng)
    if len(state.groups) < 2:
        raise DataError("split requires at least 2 variation groups")
    state.improve()

    report = SplitReport(
        train_groups=sum(1 for g in state.groups if state.in_train[g]),
        eval_groups=sum(1 for g in state.groups if not state.in_train[g]),
    )
    train: list[LabeledPair] = []
    eval_: list[LabeledPair] = []
    for pair in pairs:
        ga, gb = _pair_groups(pair)
        a_train, b_train = state.in_train[ga], state.in_train[gb]
        if a_train and b_train:
            train.append(pair)
        elif not a_train and not b_train:
            eval_.append(pair)
        else:
            report.dropped_cross_split += 1

    if state.has_pos and state.has_neg:
        train, report.trimmed_train = _trim_to_balance(train, rng)
        eval_, report.trimmed_eval = _trim_to_balance(eval_, rng)
    return DatasetSplit(train=train, eval=eval_, seed=seed, ratio=ratio, report=report)


def _trim_to_balance(pairs: list[LabeledPair], rng: random.Random) -> tuple[list[LabeledPair], int]:
    pos_idx = [i for i, p in enumerate(pairs) if p.label == VARIANT_MATCH]
    neg_idx = [i for i, p in enumerate(pairs) if p.label == MISMATCH]
    surplus = len(pos_idx) - len(neg_idx)
    if surplus == 0:
        return pairs, 0
    majority = pos_idx if surplus > 0 else neg_idx
    drop = set(rng.sample(majority, abs(surplus)))
    return [p for i, p in enumerate(pairs) if i not in drop], abs(surplus)


@dataclass(frozen=True)
class SerializedPair:
    """Fixed-length token sequence: [BOS] left [SEP] right [SEP] padding."""

    tokens: tuple[str, ...]
    left_token_count: int
    right_token_count: int
    truncated_left: bool
    truncated_right: bool


def attributes_text(product: Product) -> str:
    """The product's attributes as 'key: value' fragments in stored order."""
    return ", ".join(f"{key}: {value}" for key, value in product.attributes)


def per_side_budget(budget: int) -> int:
    return (budget - 3) // 2


def serialize_pair(
    left: Product,
    right: Product,
    tokenizer: Tokenizer = DEFAULT_TOKENIZER,
    budget: int = 512,
) -> SerializedPair:
    """Serialize a product pair into an exactly budget-length token sequence.

    Each side is capped at floor((budget - 3) / 2) tokens; a short side's
    unused budget is never reallocated to the other side.
    """
    if budget < 8:
        raise DataError(f"token budget must be >= 8, got {budget}")
    cap = per_side_budget(budget)
    left_tokens = tokenizer.tokenize(attributes_text(left))
    right_tokens = tokenizer.tokenize(attributes_text(right))
    kept_left = left_tokens[:cap]
    kept_right = right_tokens[:cap]
    tokens = [BOS, *kept_left, SEP, *kept_right, SEP]
    tokens.extend([PAD] * (budget - len(tokens)))
    return SerializedPair(
        tokens=tuple(tokens),
        left_token_count=len(kept_left),
        right_token_count=len(kept_right),
        truncated_left=len(left_tokens) > cap,
        truncated_right=len(right_tokens) > cap,
    )


@dataclass(frozen=True)
class PairRow:
    """One exported record: the labeled pair plus its serialized form."""

    split: str
    pair: LabeledPair
    serialized: SerializedPair
    left_text: str
    right_text: str


@dataclass
class PairFile:
    meta: dict
    rows: list[PairRow]

    def rows_for(self, split: str) -> list[PairRow]:
        return [r for r in self.rows if r.split == split]

    def to_split(self) -> DatasetSplit:
        return DatasetSplit(
            train=[r.pair for r in self.rows_for("train")],
            eval=[r.pair for r in self.rows_for("eval")],
            seed=int(self.meta.get("seed", 0)),
            ratio=float(self.meta.get("ratio", 0.0)),
        )


def _row_record(row: PairRow) -> dict:
    pair, ser = row.pair, row.serialized
    return {
        "record": "pair",
        "split": row.split,
        "left_id": pair.left_id,
        "right_id": pair.right_id,
        "label": pair.label,
        "bucket": pair.bucket,
        "origin_group": pair.origin_group,
        "left_group": pair.left_group,
        "right_group": pair.right_group,
        "left_text": row.left_text,
        "right_text": row.right_text,
        "tokens": list(ser.tokens),
        "left_token_count": ser.left_token_count,
        "right_token_count": ser.right_token_count,
        "truncated_left": ser.truncated_left,
        "truncated_right": ser.truncated_right,
    }


def export_pairs(
    split: DatasetSplit,
    store: CatalogStore,
    tokenizer: Tokenizer = DEFAULT_TOKENIZER,
    path: str | Path = "pairs.jsonl",
    budget: int = 512,
    extra_meta: dict | None = None,
) -> None:
    """Write the split as newline-delimited JSON, one metadata record first."""
    path = Path(path)
    meta = {
        "record": "meta",
        "budget": budget,
        "tokenizer_id": tokenizer.tokenizer_id,
        "seed": split.seed,
        "ratio": split.ratio,
    }
    if extra_meta:
        meta.update(extra_meta)
    with path.open("w", encoding="utf-8") as handle:
        handle.write(json.dumps(meta, ensure_ascii=False) + "\n")
        for split_name, pairs in (("train", split.train), ("eval", split.eval)):
            for pair in pairs:
                left = store.products[pair.left_id]
                right = store.products[pair.right_id]
                row = PairRow(
                    split=split_name,
                    pair=pair,
                    serialized=serialize_pair(left, right, tokenizer, budget),
                    left_text=attributes_text(left),
                    right_text=attributes_text(right),
                )
                handle.write(json.dumps(_row_record(row), ensure_ascii=False) + "\n")


def read_pairs(path: str | Path) -> PairFile:
    """Parse an exported pair file back into metadata and rows."""
    path = Path(path)
    meta: dict | None = None
    rows: list[PairRow] = []
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if obj.get("record") == "meta":
                if meta is None:
                    meta = obj
                continue
            if obj.get("record") != "pair":
                raise DataError(f"line {lineno}: unknown record type {obj.get('record')!r}")
            pair = LabeledPair(
                left_id=obj["left_id"],
                right_id=obj["right_id"],
                label=obj["label"],
                bucket=obj["bucket"],
                origin_group=obj.get("origin_group"),
                left_group=obj.get("left_group"),
                right_group=obj.get("right_group"),
            )
            serialized = SerializedPair(
                tokens=tuple(obj["tokens"]),
                left_token_count=obj["left_token_count"],
                right_token_count=obj["right_token_count"],
                truncated_left=obj["truncated_left"],
                truncated_right=obj["truncated_right"],
            )
            rows.append(
                PairRow(
                    split=obj.get("split", "train"),
                    pair=pair,
                    serialized=serialized,
                    left_text=obj.get("left_text", ""),
                    right_text=obj.get("right_text", ""),
                )
            )
    if meta is None:
        raise DataError(f"{path}: missing metadata record")
    return PairFile(meta=meta, rows=rows)

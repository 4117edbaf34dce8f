from __future__ import annotations

import itertools
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from varmatch.catalog import CatalogStore, Product, VariationGroup
from varmatch.errors import DataError, PoolExhaustedError
from varmatch.normalize import DEFAULT_TOKENIZER
from varmatch.pairforge import (
    BOS,
    MISMATCH,
    PAD,
    SEP,
    VARIANT_MATCH,
    LabeledPair,
    NegativeMix,
    attributes_text,
    bucket_predicate,
    export_pairs,
    extract_positive_pairs,
    per_side_budget,
    read_pairs,
    sample_negatives,
    sample_random_negatives,
    serialize_pair,
    split_dataset,
)
from varmatch.synth import SynthSpec, synth_catalog


def store_with_group_sizes(*sizes: int) -> CatalogStore:
    products, groups = [], []
    for gi, size in enumerate(sizes):
        member_ids = []
        for pi in range(size):
            pid = f"g{gi}p{pi}"
            products.append(Product.build(pid, [("brand", f"b{gi}"), ("product_type", "t")]))
            member_ids.append(pid)
        groups.append(VariationGroup.build(f"g{gi}", member_ids))
    return CatalogStore.build(products, groups)


def brute_force_positives(store: CatalogStore) -> set[tuple[str, str]]:
    pairs = set()
    for group in store.groups.values():
        for a, b in itertools.combinations(sorted(group.member_ids), 2):
            pairs.add((a, b))
    return pairs


class TestPositivePairs:
    @pytest.mark.parametrize("size,expected", [(2, 1), (4, 6)])
    def test_group_pair_count(self, size, expected):
        store = store_with_group_sizes(size)
        assert len(extract_positive_pairs(store)) == expected

    def test_mixed_sizes_match_brute_force(self):
        store = store_with_group_sizes(1, 2, 3)
        pairs = extract_positive_pairs(store)
        assert len(pairs) == 4
        assert {p.key() for p in pairs} == brute_force_positives(store)

    def test_all_fields_set(self, small_store):
        for pair in extract_positive_pairs(small_store):
            assert pair.label == VARIANT_MATCH and pair.bucket == "positive"
            assert pair.origin_group is not None
            assert pair.left_id < pair.right_id

    def test_deterministic_order(self, small_store):
        assert extract_positive_pairs(small_store) == extract_positive_pairs(small_store)

    def test_empty_store(self):
        assert extract_positive_pairs(CatalogStore.build([], [])) == []


class TestBucketPredicates:
    def test_table5_keyboards_qualify_only_medium(self, table5_store):
        razer = table5_store.products["razer-huntsman-mini"]
        hyperx = table5_store.products["hyperx-alloy-origins"]
        verdicts = {
            bucket: bucket_predicate(bucket, razer, hyperx, table5_store)
            for bucket in ("hard", "medium", "easy")
        }
        assert verdicts == {"hard": False, "medium": True, "easy": False}

    def test_table5_keyboard_vs_dress_is_easy_only(self, table5_store):
        razer = table5_store.products["razer-huntsman-mini"]
        zara = table5_store.products["zara-satin-slip-dress"]
        verdicts = {
            bucket: bucket_predicate(bucket, razer, zara, table5_store)
            for bucket in ("hard", "medium", "easy")
        }
        assert verdicts == {"hard": False, "medium": False, "easy": True}

    def test_missing_brand_never_equal(self):
        a = Product.build("a", [("product_type", "t")])
        b = Product.build("b", [("product_type", "t")])
        store = CatalogStore.build([a, b], [])
        assert bucket_predicate("medium", a, b, store)  # same type, brands missing
        assert not bucket_predicate("hard", a, b, store)


class TestSampleNegatives:
    def test_single_group_hard_pool_empty(self):
        store = store_with_group_sizes(3)  # one group, one brand, one type
        positives = extract_positive_pairs(store)
        with pytest.raises(PoolExhaustedError, match="hard"):
            sample_negatives(store, positives, NegativeMix(1.0, 0.0, 0.0), 1, seed=0)

    def test_counts_and_remainder_to_hard(self):
        mix = NegativeMix(0.5, 0.3, 0.2)
        assert mix.bucket_counts(10) == {"hard": 5, "medium": 3, "easy": 2}
        thirds = NegativeMix()
        counts = thirds.bucket_counts(100_000)
        assert sum(counts.values()) == 100_000
        assert counts["hard"] >= counts["medium"] == counts["easy"]

    def test_mix_must_sum_to_one(self, small_store):
        with pytest.raises(DataError, match="sum to 1"):
            sample_negatives(small_store, [], NegativeMix(0.5, 0.3, 0.1), 1, seed=0)

    def test_soundness_no_duplicates_deterministic(self, small_store):
        positives = extract_positive_pairs(small_store)
        negatives = sample_negatives(small_store, positives, NegativeMix(), 60, seed=3)
        assert len(negatives) == 60
        seen = set()
        positive_keys = {p.key() for p in positives}
        for pair in negatives:
            assert pair.label == MISMATCH
            left = small_store.products[pair.left_id]
            right = small_store.products[pair.right_id]
            assert bucket_predicate(pair.bucket, left, right, small_store)
            assert pair.key() not in positive_keys
            assert pair.key() not in seen
            seen.add(pair.key())
        assert negatives == sample_negatives(small_store, positives, NegativeMix(), 60, seed=3)

    def test_random_sampler_cross_group_only(self, small_store):
        positives = extract_positive_pairs(small_store)
        negatives = sample_random_negatives(small_store, positives, 40, seed=9)
        assert len(negatives) == 40
        for pair in negatives:
            assert pair.bucket == "random"
            ga = small_store.group_of.get(pair.left_id)
            gb = small_store.group_of.get(pair.right_id)
            assert ga != gb

    def test_zero_count(self, small_store):
        assert sample_negatives(small_store, [], NegativeMix(), 0, seed=0) == []


class TestSplit:
    def _pairs(self, store, seed=1):
        positives = extract_positive_pairs(store)
        negatives = sample_negatives(store, positives, NegativeMix(), len(positives), seed)
        return positives + negatives

    def test_no_group_leakage(self):
        store = synth_catalog(SynthSpec(n_types=2, brands_per_type=2, groups_per_brand=3,
                                        group_size_range=(2, 4)), seed=3)
        split = split_dataset(self._pairs(store), 0.7, seed=0)
        train_groups = {g for p in split.train for g in (p.left_group, p.right_group) if g}
        eval_groups = {g for p in split.eval for g in (p.left_group, p.right_group) if g}
        assert not train_groups & eval_groups

    def test_two_equal_groups_ratio_half(self):
        store = store_with_group_sizes(3, 3)
        positives = extract_positive_pairs(store)
        split = split_dataset(positives, 0.5, seed=4)
        train_groups = {p.origin_group for p in split.train}
        eval_groups = {p.origin_group for p in split.eval}
        assert len(train_groups) == len(eval_groups) == 1

    def test_deterministic_under_seed(self, small_store):
        pairs = self._pairs(small_store)
        a = split_dataset(pairs, 0.7, seed=11)
        b = split_dataset(pairs, 0.7, seed=11)
        assert a.train == b.train and a.eval == b.eval

    def test_balanced_labels(self, small_store):
        split = split_dataset(self._pairs(small_store), 0.7, seed=2)
        for part in (split.train, split.eval):
            pos = sum(1 for p in part if p.label == VARIANT_MATCH)
            assert pos == len(part) - pos

    @pytest.mark.parametrize("ratio", [0.0, 1.0, -0.2, 1.5])
    def test_ratio_out_of_range(self, ratio, small_store):
        with pytest.raises(DataError, match="ratio"):
            split_dataset(self._pairs(small_store), ratio, seed=0)

    def test_fewer_than_two_groups(self):
        store = store_with_group_sizes(4)
        with pytest.raises(DataError, match="at least 2"):
            split_dataset(extract_positive_pairs(store), 0.7, seed=0)

    def test_cross_split_negatives_reported(self, small_store):
        pairs = self._pairs(small_store)
        split = split_dataset(pairs, 0.7, seed=2)
        kept = len(split.train) + len(split.eval)
        dropped = split.report.dropped_cross_split
        trimmed = split.report.trimmed_train + split.report.trimmed_eval
        assert kept + dropped + trimmed == len(pairs)


class TestSerialize:
    def _product_with_tokens(self, pid: str, n: int) -> Product:
        # each attribute contributes exactly 2 tokens: "kN: wordN"
        attrs = [(f"k{i}", f"w{i}") for i in range(n // 2)]
        if n % 2:
            attrs.append(("odd", ""))  # key token only
        return Product.build(pid, attrs)

    def test_worked_example_489_padding(self):
        left = self._product_with_tokens("a", 10)
        right = self._product_with_tokens("b", 10)
        serialized = serialize_pair(left, right, budget=512)
        assert len(serialized.tokens) == 512
        assert serialized.tokens.count(PAD) == 489
        assert serialized.left_token_count == serialized.right_token_count == 10
        assert not serialized.truncated_left and not serialized.truncated_right

    def test_truncation_to_per_side_cap(self):
        left = self._product_with_tokens("a", 300)
        right = self._product_with_tokens("b", 10)
        serialized = serialize_pair(left, right, budget=512)
        assert per_side_budget(512) == 254
        assert serialized.left_token_count == 254
        assert serialized.truncated_left and not serialized.truncated_right
        # unused right-side budget is not reallocated
        assert serialized.right_token_count == 10

    def test_swap_symmetry(self):
        left = self._product_with_tokens("a", 6)
        right = self._product_with_tokens("b", 4)
        ab = serialize_pair(left, right, budget=32)
        ba = serialize_pair(right, left, budget=32)
        assert ab.left_token_count == ba.right_token_count
        assert ab.tokens[0] == ba.tokens[0] == BOS
        content_ab = [t for t in ab.tokens if t not in (BOS, SEP, PAD)]
        content_ba = [t for t in ba.tokens if t not in (BOS, SEP, PAD)]
        assert sorted(content_ab) == sorted(content_ba)

    def test_layout_and_separator_count(self):
        serialized = serialize_pair(
            self._product_with_tokens("a", 4), self._product_with_tokens("b", 4), budget=16
        )
        tokens = list(serialized.tokens)
        assert tokens[0] == BOS
        assert tokens.count(SEP) == 2
        second_sep = len(tokens) - 1 - tokens[::-1].index(SEP)
        assert all(t == PAD for t in tokens[second_sep + 1:])

    def test_budget_too_small(self):
        with pytest.raises(DataError, match="budget"):
            serialize_pair(self._product_with_tokens("a", 2),
                           self._product_with_tokens("b", 2), budget=7)

    @given(
        n_left=st.integers(min_value=0, max_value=40),
        n_right=st.integers(min_value=0, max_value=40),
        budget=st.integers(min_value=8, max_value=64),
    )
    @settings(max_examples=60, deadline=None)
    def test_length_is_always_budget(self, n_left, n_right, budget):
        serialized = serialize_pair(
            self._product_with_tokens("a", n_left),
            self._product_with_tokens("b", n_right),
            budget=budget,
        )
        assert len(serialized.tokens) == budget
        cap = per_side_budget(budget)
        assert serialized.left_token_count <= cap
        assert serialized.right_token_count <= cap
        assert serialized.tokens.count(SEP) == 2


class TestExport:
    def test_round_trip_serialized_fields(self, small_store, tmp_path):
        positives = extract_positive_pairs(small_store)
        negatives = sample_negatives(small_store, positives, NegativeMix(), len(positives), 5)
        split = split_dataset(positives + negatives, 0.7, seed=5)
        path = tmp_path / "pairs.jsonl"
        export_pairs(split, small_store, DEFAULT_TOKENIZER, path, budget=64)
        loaded = read_pairs(path)
        assert loaded.meta["budget"] == 64
        assert loaded.meta["tokenizer_id"] == DEFAULT_TOKENIZER.tokenizer_id
        assert loaded.meta["seed"] == 5
        rows = loaded.rows
        assert len(rows) == len(split.train) + len(split.eval)
        for row in rows:
            left = small_store.products[row.pair.left_id]
            right = small_store.products[row.pair.right_id]
            assert row.serialized == serialize_pair(left, right, DEFAULT_TOKENIZER, 64)
            assert row.left_text == attributes_text(left)
        again = loaded.to_split()
        assert again.train == split.train and again.eval == split.eval

    def test_empty_split_has_meta_only(self, tmp_path, small_store):
        split = split_dataset(extract_positive_pairs(small_store), 0.5, seed=1)
        split.train.clear()
        split.eval.clear()
        path = tmp_path / "pairs.jsonl"
        export_pairs(split, small_store, DEFAULT_TOKENIZER, path, budget=32)
        lines = [json.loads(l) for l in path.read_text().splitlines() if l.strip()]
        assert len(lines) == 1 and lines[0]["record"] == "meta"

    def test_labels_preserved(self, small_store, tmp_path):
        positives = extract_positive_pairs(small_store)[:4]
        split = split_dataset(positives, 0.5, seed=1)
        path = tmp_path / "pairs.jsonl"
        export_pairs(split, small_store, DEFAULT_TOKENIZER, path, budget=32)
        loaded = read_pairs(path)
        assert all(row.pair.label == VARIANT_MATCH for row in loaded.rows)

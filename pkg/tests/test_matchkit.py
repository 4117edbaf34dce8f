from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import golden_text
from varmatch.catalog import Product
from varmatch.errors import DataError, ResponseParseError, TransportError
from varmatch.matchkit import (
    ATTR_GEN_PARAMS,
    MATCH_GEN_PARAMS,
    BaselineHandle,
    EndpointConfig,
    GenerativeHandle,
    MatchScore,
    OracleHandle,
    RemoteHandle,
    baseline_score,
    build_match_prompt,
    check_scoring_endpoint,
    classify,
    parse_match_response,
    score_pair,
)
from varmatch.pairforge import MISMATCH, VARIANT_MATCH


def make_product(pid: str, **attrs: str) -> Product:
    return Product.build(pid, list(attrs.items()))


attribute_values = st.text(
    alphabet="abcdef 123", min_size=0, max_size=12
)
products = st.builds(
    lambda pid, attrs: Product.build(pid, list(attrs.items())),
    st.sampled_from(["p1", "p2", "p3"]),
    st.dictionaries(st.sampled_from(["brand", "color", "size", "note"]),
                    attribute_values, max_size=4),
)


class TestBaseline:
    def test_identical_sets_score_one(self):
        a = make_product("a", brand="acme", color="red")
        b = make_product("b", brand="acme", color="red")
        assert baseline_score(a, b) == 1.0

    def test_disjoint_sets_score_zero(self):
        a = make_product("a", color="red")
        b = make_product("b", size="xl")
        assert baseline_score(a, b) == 0.0

    def test_single_token_worked_example(self):
        a = make_product("a", brand="acme", color="red")
        b = make_product("b", brand="acme", color="blue")
        assert baseline_score(a, b) == pytest.approx(1 / 3)

    def test_both_empty_is_degenerate_zero(self):
        a = Product(product_id="a", attributes=())
        b = Product(product_id="b", attributes=())
        assert baseline_score(a, b) == 0.0
        score = BaselineHandle().score_batch([(a, b)])[0]
        assert score.probability == 0.0 and score.degenerate

    @given(products, products)
    @settings(max_examples=80, deadline=None)
    def test_symmetric_and_bounded(self, a, b):
        forward = baseline_score(a, b)
        assert forward == baseline_score(b, a)
        assert 0.0 <= forward <= 1.0


class TestOracle:
    def test_within_and_cross_group(self, small_store):
        handle = OracleHandle.from_store(small_store)
        group = next(iter(small_store.groups.values()))
        a, b = (small_store.products[m] for m in group.member_ids[:2])
        assert score_pair(handle, a, b).probability == 1.0
        other_group = [g for g in small_store.groups.values() if g.group_id != group.group_id][0]
        c = small_store.products[other_group.member_ids[0]]
        assert score_pair(handle, a, c).probability == 0.0

    def test_symmetry(self, small_store):
        handle = OracleHandle.from_store(small_store)
        ids = sorted(small_store.products)[:6]
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                a, b = small_store.products[ids[i]], small_store.products[ids[j]]
                assert score_pair(handle, a, b).probability == score_pair(handle, b, a).probability


class TestClassify:
    @pytest.mark.parametrize("probability,threshold,label", [
        (0.6, 0.5, VARIANT_MATCH),
        (0.5, 0.5, VARIANT_MATCH),
        (0.49, 0.5, MISMATCH),
    ])
    def test_threshold_rule(self, probability, threshold, label):
        verdict = classify(MatchScore(probability=probability, source="test"), threshold)
        assert verdict.label == label
        assert verdict.similarity == probability

    def test_threshold_validated(self):
        with pytest.raises(DataError):
            classify(MatchScore(probability=0.5, source="test"), 1.5)


class TestMatchPrompt:
    def test_contains_paper_sentence(self):
        a = make_product("a", brand="acme")
        b = make_product("b", brand="zenco")
        prompt = build_match_prompt(a, b)
        assert ("The products are considered the same product if all details match "
                "except for details like color or size.") in prompt

    def test_golden_bytes(self, table5_store):
        razer = table5_store.products["razer-huntsman-mini"]
        hyperx = table5_store.products["hyperx-alloy-origins"]
        assert build_match_prompt(razer, hyperx) == golden_text("match_prompt_table5.txt")

    def test_empty_attribute_product(self):
        empty = Product(product_id="x", attributes=())
        other = make_product("y", brand="acme")
        prompt = build_match_prompt(empty, other)
        assert "Description of the first product: <product 1>\n</product 1>" in prompt

    def test_deterministic(self, table5_store):
        razer = table5_store.products["razer-huntsman-mini"]
        hyperx = table5_store.products["hyperx-alloy-origins"]
        assert build_match_prompt(razer, hyperx) == build_match_prompt(razer, hyperx)


class TestParseMatchResponse:
    @pytest.mark.parametrize("text,label,similarity", [
        ("yes, 0.9", VARIANT_MATCH, 0.9),
        ("No. 0.2", MISMATCH, 0.2),
        ("  YES 1", VARIANT_MATCH, 1.0),
        ("no - similarity 0.05", MISMATCH, 0.05),
    ])
    def test_grammar(self, text, label, similarity):
        verdict = parse_match_response(text)
        assert verdict.label == label
        assert verdict.similarity == pytest.approx(similarity)
        assert not verdict.score_defaulted

    @pytest.mark.parametrize("text,label,similarity", [
        ("yes", VARIANT_MATCH, 1.0),
        ("no.", MISMATCH, 0.0),
        ("yes, about 85%", VARIANT_MATCH, 1.0),  # 85 is out of [0, 1]
    ])
    def test_defaults_flagged(self, text, label, similarity):
        verdict = parse_match_response(text)
        assert verdict.label == label
        assert verdict.similarity == similarity
        assert verdict.score_defaulted

    def test_neither_yes_nor_no(self):
        with pytest.raises(ResponseParseError) as excinfo:
            parse_match_response("maybe they match")
        assert "maybe they match" in excinfo.value.raw

    def test_totality_on_junk(self):
        for text in ("", "   ", "42", "::::", "\n\nyes 0.5"):
            try:
                parse_match_response(text)
            except ResponseParseError:
                pass  # typed error is the contract; no other exception allowed


class TestRemoteHandle:
    def test_scores_follow_input_order(self, stub_server, small_store):
        handle = RemoteHandle(stub_server.url, budget=32)
        ids = sorted(small_store.products)[:4]
        pairs = [(small_store.products[ids[0]], small_store.products[ids[1]]),
                 (small_store.products[ids[2]], small_store.products[ids[3]])]
        scores = handle.score_batch(pairs)
        assert len(scores) == 2
        assert all(0.0 <= s.probability <= 1.0 and s.source == "remote" for s in scores)
        assert [s.probability for s in handle.score_batch(list(reversed(pairs)))] == [
            scores[1].probability, scores[0].probability]

    def test_retry_then_success(self, stub_server, small_store):
        stub_server.inject_failures(500)
        endpoint = EndpointConfig(stub_server.url, max_attempts=3, backoff=0.01)
        handle = RemoteHandle(endpoint, budget=32)
        ids = sorted(small_store.products)[:2]
        scores = handle.score_batch([(small_store.products[ids[0]], small_store.products[ids[1]])])
        assert len(scores) == 1

    def test_transport_error_carries_attempts(self, stub_server, small_store):
        stub_server.inject_failures(500, 500, 500)
        endpoint = EndpointConfig(stub_server.url, max_attempts=3, backoff=0.01)
        handle = RemoteHandle(endpoint, budget=32)
        ids = sorted(small_store.products)[:2]
        with pytest.raises(TransportError) as excinfo:
            handle.score_batch([(small_store.products[ids[0]], small_store.products[ids[1]])])
        assert excinfo.value.attempts == 3

    def test_malformed_response_is_parse_error(self, stub_server, small_store):
        stub_server.set_score_fn(lambda pair: 3.5)  # out of range
        handle = RemoteHandle(stub_server.url, budget=32)
        ids = sorted(small_store.products)[:2]
        with pytest.raises(ResponseParseError):
            handle.score_batch([(small_store.products[ids[0]], small_store.products[ids[1]])])

    def test_conformance_check_passes_against_stub(self, stub_server):
        passed = check_scoring_endpoint(stub_server.url)
        assert "order_preserved" in passed and "malformed_request_rejected" in passed


class TestGenerativeHandle:
    def test_verdict_from_canned_completion(self, stub_server):
        stub_server.set_completion("yes, 0.9")
        handle = GenerativeHandle(stub_server.url)
        a = make_product("a", brand="acme")
        b = make_product("b", brand="acme")
        verdict = handle.verdict_pair(a, b)
        assert verdict.label == VARIANT_MATCH and verdict.similarity == 0.9
        score = score_pair(handle, a, b)
        assert score.probability == 0.9 and score.source == "generative"

    def test_params_defaults(self):
        assert MATCH_GEN_PARAMS.to_wire() == {
            "max_tokens": 30, "temperature": 0.0, "top_k": 100, "top_p": None}
        assert ATTR_GEN_PARAMS.to_wire() == {
            "max_tokens": 500, "temperature": 0.0, "top_k": None, "top_p": 0.9}

    def test_missing_completion_is_parse_error(self, stub_server):
        stub_server.set_completion(None)  # "completion" becomes null, not a string
        handle = GenerativeHandle(stub_server.url)
        with pytest.raises(ResponseParseError):
            handle.complete("hello")

    def test_prompt_reaches_server(self, stub_server):
        seen = {}

        def completer(prompt: str) -> str:
            seen["prompt"] = prompt
            return "no 0.1"

        stub_server.set_completion(completer)
        handle = GenerativeHandle(stub_server.url)
        a = make_product("a", brand="acme")
        b = make_product("b", brand="zenco")
        handle.verdict_pair(a, b)
        assert seen["prompt"] == build_match_prompt(a, b)

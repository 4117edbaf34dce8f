"""Variation vs. common attribute identification for variation groups.

Two routes produce per-attribute labels:

  * `heuristic_labels` — an attribute is a variation attribute when its
    distinct-value ratio across the group exceeds 0.9 (absence counts as one
    extra distinct pseudo-value when only some members carry the key);
  * `identify_attributes` — prompt a completion endpoint (optionally with
    retrieved context about usual variation attributes for the product type
    and brand), parse the JSON reply, and reconcile contradictions.

Contradictory labels (an attribute named both different and same) resolve to
variation, per the prompt's own precedence rule, and are counted as penalties.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

from .catalog import CatalogStore, Product, render_product_block
from .errors import DataError, ResponseParseError
from .matchkit import ATTR_GEN_PARAMS, GenerativeHandle, GenParams, load_template
from .normalize import normalize_key, normalize_value

VARIATION = "variation"
COMMON = "common"

ATTR_TEMPLATE = "attr_v1.txt"
_RAG_OPEN = "<if-rag>"
_RAG_CLOSE = "</if-rag>"

HEURISTIC_VARIATION_RATIO = 0.9


@dataclass(frozen=True)
class AttrPrediction:
    """Parsed model output: attribute names labeled different/same plus reasons."""

    different: tuple[str, ...]
    same: tuple[str, ...]
    reason: tuple[str, ...] = ()
    contradictions: tuple[str, ...] = ()


@dataclass(frozen=True)
class RagContext:
    """Known variation attributes for a product type and a brand."""

    product_type: str
    brand: str
    type_variation_attrs: tuple[str, ...]
    brand_variation_attrs: tuple[str, ...]


def heuristic_labels(group: Sequence[Product]) -> dict[str, str]:
    """Label every attribute key present in the group as variation or common.

    For each key: d = number of distinct normalized values among members that
    carry the key, plus one when the key is present on some but not all
    members; the key is a variation attribute iff d / group_size > 0.9.
    """
    if len(group) < 2:
        raise DataError("heuristic labels need a group of at least 2 products")
    n = len(group)
    keys: set[str] = set()
    for product in group:
        keys.update(product.attribute_keys())
    labels: dict[str, str] = {}
    for key in keys:
        values = set()
        holders = 0
        for product in group:
            value = product.get(key)
            if value is None:
                continue
            holders += 1
            values.add(normalize_value(value))
        distinct = len(values) + (1 if 0 < holders < n else 0)
        labels[key] = VARIATION if distinct / n > HEURISTIC_VARIATION_RATIO else COMMON
    return labels


def group_variation_keys(store: CatalogStore, group_id: str) -> tuple[str, ...]:
    """A group's variation-attribute names: gold when present, else heuristic."""
    group = store.groups[group_id]
    if group.gold_variation_keys is not None:
        return group.gold_variation_keys
    members = store.group_members(group_id)
    if len(members) < 2:
        return ()
    labels = heuristic_labels(members)
    return tuple(sorted(key for key, label in labels.items() if label == VARIATION))


def retrieve_variation_context(
    store: CatalogStore,
    product_type: str,
    brand: str,
    exclude_member_ids: Iterable[str] = (),
) -> RagContext:
    """Collect unique variation-attribute names from matching variation groups.

    Groups whose members all share the given product type contribute to the
    type list, likewise for brand; groups containing any excluded member id
    (the query group itself) are skipped to avoid leaking its own labels.
    """
    excluded = set(exclude_member_ids)
    type_attrs: set[str] = set()
    brand_attrs: set[str] = set()
    for group_id in sorted(store.groups):
        group = store.groups[group_id]
        if excluded.intersection(group.member_ids):
            continue
        members = store.group_members(group_id)
        keys = None
        if all(m.product_type == product_type for m in members):
            keys = group_variation_keys(store, group_id)
            type_attrs.update(keys)
        if all(m.brand == brand for m in members):
            if keys is None:
                keys = group_variation_keys(store, group_id)
            brand_attrs.update(keys)
    return RagContext(
        product_type=product_type,
        brand=brand,
        type_variation_attrs=tuple(sorted(type_attrs)),
        brand_variation_attrs=tuple(sorted(brand_attrs)),
    )


def build_attr_prompt(group: Sequence[Product], context: RagContext | None = None) -> str:
    """Fill the attribute-identification template for a variation group.

    The retrieved-context sentences are inserted only when a context is given;
    without one the whole conditional block (and its blank line) is omitted.
    """
    if len(group) < 2:
        raise DataError("attribute prompt needs a group of at least 2 products")
    template = load_template(ATTR_TEMPLATE)
    paragraphs = template.split("\n\n")
    rendered: list[str] = []
    for paragraph in paragraphs:
        if paragraph.startswith(_RAG_OPEN):
            if context is None:
                continue
            block = paragraph[len(_RAG_OPEN) : -len(_RAG_CLOSE)]
            block = block.replace("{product_type}", context.product_type)
            block = block.replace("{brand}", context.brand)
            block = block.replace(
                "{product_type_variation_attributes}",
                ", ".join(context.type_variation_attrs),
            )
            block = block.replace(
                "{brand_variation_attributes}",
                ", ".join(context.brand_variation_attrs),
            )
            rendered.append(block)
        else:
            rendered.append(paragraph)
    prompt = "\n\n".join(rendered)
    blocks = "\n".join(
        render_product_block(product, i) for i, product in enumerate(group, start=1)
    )
    return prompt.replace("{variation_group_products}", blocks)


def parse_attr_response(text: str) -> AttrPrediction:
    """Extract the first well-formed JSON object and read the label arrays.

    Models often wrap the JSON in prose despite instructions, so scanning
    starts at each '{' until one decodes. "Different" and "Same" must be
    string arrays; "Reason" is optional. Names are normalized like catalog
    attribute keys; names present in both arrays are recorded as
    contradictions (and kept in both lists until reconciliation).
    """
    decoder = json.JSONDecoder()
    obj = None
    for start, char in enumerate(text):
        if char != "{":
            continue
        try:
            candidate, _ = decoder.raw_decode(text, start)
        except ValueError:
            continue
        if isinstance(candidate, dict):
            obj = candidate
            break
    if obj is None:
        raise ResponseParseError("no JSON object found in response", raw=text)

    def names(field: str) -> tuple[str, ...]:
        value = obj.get(field)
        if not isinstance(value, list) or not all(isinstance(x, str) for x in value):
            raise ResponseParseError(f'"{field}" must be an array of strings', raw=text)
        seen: list[str] = []
        for name in (normalize_key(x) for x in value):
            if name and name not in seen:
                seen.append(name)
        return tuple(seen)

    different = names("Different")
    same = names("Same")
    reason_value = obj.get("Reason", [])
    if isinstance(reason_value, str):
        reason_value = [reason_value]
    reason = tuple(str(r) for r in reason_value) if isinstance(reason_value, list) else ()
    contradictions = tuple(name for name in different if name in set(same))
    return AttrPrediction(
        different=different, same=same, reason=reason, contradictions=contradictions
    )


def reconcile_labels(prediction: AttrPrediction) -> tuple[dict[str, str], int]:
    """Resolve contradictions to variation and count them as penalties."""
    labels: dict[str, str] = {}
    for name in prediction.same:
        labels[name] = COMMON
    for name in prediction.different:
        labels[name] = VARIATION
    return labels, len(prediction.contradictions)


@dataclass
class AttrResult:
    labels: dict[str, str]
    penalty_count: int
    prediction: AttrPrediction


def identify_attributes(
    handle: GenerativeHandle,
    group: Sequence[Product],
    use_rag: bool = False,
    store: CatalogStore | None = None,
    params: GenParams = ATTR_GEN_PARAMS,
) -> AttrResult:
    """Retrieve context, prompt the endpoint, parse and reconcile labels."""
    if len(group) < 2:
        raise DataError("attribute identification needs a group of at least 2 products")
    context = None
    if use_rag:
        if store is None:
            raise DataError("use_rag requires a catalog store to retrieve context from")
        anchor = group[0]
        context = retrieve_variation_context(
            store,
            anchor.product_type or "",
            anchor.brand or "",
            exclude_member_ids=[p.product_id for p in group],
        )
    prompt = build_attr_prompt(group, context)
    completion = handle.complete(prompt, params)
    prediction = parse_attr_response(completion)
    labels, penalties = reconcile_labels(prediction)
    return AttrResult(labels=labels, penalty_count=penalties, prediction=prediction)

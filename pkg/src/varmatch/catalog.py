"""Product / variation-group data model and newline-delimited JSON catalog files.

A catalog file holds one JSON object per line:

    {"record": "product", "product_id": ..., "brand": ..., "product_type": ...,
     "attributes": [{"key": ..., "value": ...}, ...], "source_url": ...}
    {"record": "group", "group_id": ..., "member_ids": [...],
     "gold_variation_keys": [...]}

Attribute keys are normalized on ingest (see `normalize.normalize_key`);
values are kept verbatim. Malformed records are collected as line-level
errors and skipped; conflicting duplicates, references to unknown products
and double group membership abort the ingest.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import DataError, IngestError
from .normalize import normalize_key

CATALOG_FORMAT_JSONL = "jsonl"


@dataclass(frozen=True)
class Product:
    """One product listing: an identifier plus ordered attribute key-value pairs."""

    product_id: str
    attributes: tuple[tuple[str, str], ...]
    brand: str | None = None
    product_type: str | None = None
    source_url: str | None = None

    @classmethod
    def build(
        cls,
        product_id: str,
        attributes: list[tuple[str, str]] | tuple[tuple[str, str], ...],
        brand: str | None = None,
        product_type: str | None = None,
        source_url: str | None = None,
    ) -> "Product":
        """Normalize keys, reconcile brand/product_type fields with attributes.

        The brand and product_type fields, when present, are mirrored into the
        attribute list (and vice versa: a missing field is derived from the
        attribute when only the attribute is given).
        """
        if not product_id:
            raise DataError("product_id must be non-empty")
        normalized: list[tuple[str, str]] = []
        seen: set[str] = set()
        for raw_key, value in attributes:
            key = normalize_key(str(raw_key))
            if not key:
                raise DataError(f"product {product_id!r}: empty attribute key")
            if key in seen:
                raise DataError(f"product {product_id!r}: duplicate attribute key {key!r}")
            seen.add(key)
            normalized.append((key, str(value)))
        attrs = dict(normalized)

        brand = brand if brand is not None else attrs.get("brand")
        product_type = product_type if product_type is not None else attrs.get("product_type")
        for key, value, position in (("product_type", product_type, 0), ("brand", brand, 0)):
            if value is None:
                continue
            if key in attrs:
                if attrs[key] != value:
                    raise DataError(
                        f"product {product_id!r}: field {key}={value!r} conflicts "
                        f"with attribute value {attrs[key]!r}"
                    )
            else:
                normalized.insert(position, (key, value))
        return cls(
            product_id=product_id,
            attributes=tuple(normalized),
            brand=brand,
            product_type=product_type,
            source_url=source_url,
        )

    def attribute_map(self) -> dict[str, str]:
        return dict(self.attributes)

    def attribute_keys(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.attributes)

    def get(self, key: str) -> str | None:
        for k, v in self.attributes:
            if k == key:
                return v
        return None


@dataclass(frozen=True)
class VariationGroup:
    """Products co-listed on one webpage, optionally with known variation keys."""

    group_id: str
    member_ids: tuple[str, ...]
    gold_variation_keys: tuple[str, ...] | None = None

    @classmethod
    def build(
        cls,
        group_id: str,
        member_ids: list[str] | tuple[str, ...],
        gold_variation_keys: list[str] | tuple[str, ...] | None = None,
    ) -> "VariationGroup":
        if not group_id:
            raise DataError("group_id must be non-empty")
        members = tuple(str(m) for m in member_ids)
        if not members:
            raise DataError(f"group {group_id!r}: member_ids must be non-empty")
        if len(set(members)) != len(members):
            raise DataError(f"group {group_id!r}: member_ids contain duplicates")
        gold = None
        if gold_variation_keys is not None:
            gold = tuple(sorted({normalize_key(str(k)) for k in gold_variation_keys}))
        return cls(group_id=group_id, member_ids=members, gold_variation_keys=gold)


@dataclass
class IngestReport:
    """Line-level problems and counts collected while reading a catalog file."""

    n_products: int = 0
    n_groups: int = 0
    errors: list[tuple[int, str]] = field(default_factory=list)

    @property
    def n_errors(self) -> int:
        return len(self.errors)

    def summary(self) -> str:
        lines = [f"products={self.n_products} groups={self.n_groups} record_errors={self.n_errors}"]
        lines.extend(f"  line {line}: {msg}" for line, msg in self.errors)
        return "\n".join(lines)


@dataclass
class CatalogStore:
    """Immutable-after-build container for products, groups and lookup indexes."""

    products: dict[str, Product]
    groups: dict[str, VariationGroup]
    index_brand_type: dict[tuple[str | None, str | None], frozenset[str]]
    group_of: dict[str, str]
    report: IngestReport | None = None

    @classmethod
    def build(
        cls,
        products: list[Product] | tuple[Product, ...],
        groups: list[VariationGroup] | tuple[VariationGroup, ...] = (),
        report: IngestReport | None = None,
    ) -> "CatalogStore":
        product_map: dict[str, Product] = {}
        for product in products:
            existing = product_map.get(product.product_id)
            if existing is not None and existing != product:
                raise DataError(f"duplicate product_id {product.product_id!r} with conflicting bodies")
            product_map[product.product_id] = product

        group_map: dict[str, VariationGroup] = {}
        group_of: dict[str, str] = {}
        for group in groups:
            existing = group_map.get(group.group_id)
            if existing is not None:
                if existing != group:
                    raise DataError(f"duplicate group_id {group.group_id!r} with conflicting bodies")
                continue
            member_keys: set[str] = set()
            for member_id in group.member_ids:
                if member_id not in product_map:
                    raise DataError(f"group {group.group_id!r} references unknown product {member_id!r}")
                if member_id in group_of:
                    raise DataError(
                        f"product {member_id!r} belongs to both group "
                        f"{group_of[member_id]!r} and {group.group_id!r}"
                    )
                member_keys.update(product_map[member_id].attribute_keys())
            if group.gold_variation_keys:
                missing = set(group.gold_variation_keys) - member_keys
                if missing:
                    raise DataError(
                        f"group {group.group_id!r}: gold_variation_keys {sorted(missing)} "
                        "do not appear in any member"
                    )
            group_map[group.group_id] = group
            for member_id in group.member_ids:
                group_of[member_id] = group.group_id

        index: dict[tuple[str | None, str | None], set[str]] = {}
        for product in product_map.values():
            index.setdefault((product.brand, product.product_type), set()).add(product.product_id)
        return cls(
            products=product_map,
            groups=group_map,
            index_brand_type={key: frozenset(ids) for key, ids in index.items()},
            group_of=group_of,
            report=report,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CatalogStore):
            return NotImplemented
        return self.products == other.products and self.groups == other.groups

    def group_members(self, group_id: str) -> tuple[Product, ...]:
        group = self.groups[group_id]
        return tuple(self.products[m] for m in group.member_ids)


def _parse_product_record(obj: dict) -> Product:
    attrs = obj.get("attributes", [])
    if not isinstance(attrs, list):
        raise DataError("attributes must be a list")
    pairs = []
    for item in attrs:
        if not isinstance(item, dict) or "key" not in item or "value" not in item:
            raise DataError("attribute entries must be objects with 'key' and 'value'")
        pairs.append((item["key"], item["value"]))
    return Product.build(
        product_id=str(obj.get("product_id", "")),
        attributes=pairs,
        brand=obj.get("brand"),
        product_type=obj.get("product_type"),
        source_url=obj.get("source_url"),
    )


def _parse_group_record(obj: dict) -> VariationGroup:
    member_ids = obj.get("member_ids")
    if not isinstance(member_ids, list):
        raise DataError("member_ids must be a list")
    gold = obj.get("gold_variation_keys")
    if gold is not None and not isinstance(gold, list):
        raise DataError("gold_variation_keys must be a list when present")
    return VariationGroup.build(
        group_id=str(obj.get("group_id", "")),
        member_ids=member_ids,
        gold_variation_keys=gold,
    )


def ingest_catalog(path: str | Path, format: str = CATALOG_FORMAT_JSONL) -> CatalogStore:
    """Read a catalog file into a validated store.

    Malformed records are skipped and reported on ``store.report``; duplicate
    ids with conflicting bodies, group references to unknown products and
    products claimed by two groups raise :class:`IngestError`.
    """
    if format != CATALOG_FORMAT_JSONL:
        raise DataError(f"unsupported catalog format {format!r}")
    path = Path(path)
    report = IngestReport()
    products: dict[str, Product] = {}
    product_line: dict[str, int] = {}
    groups: dict[str, VariationGroup] = {}
    group_line: dict[str, int] = {}

    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                report.errors.append((lineno, f"invalid JSON: {exc.msg}"))
                continue
            if not isinstance(obj, dict):
                report.errors.append((lineno, "record must be a JSON object"))
                continue
            kind = obj.get("record")
            if kind == "meta":  # self-description line written by tooling
                continue
            try:
                if kind == "product":
                    product = _parse_product_record(obj)
                    existing = products.get(product.product_id)
                    if existing is not None and existing != product:
                        raise IngestError(
                            f"duplicate product_id {product.product_id!r} conflicts with "
                            f"line {product_line[product.product_id]}",
                            line=lineno,
                        )
                    products[product.product_id] = product
                    product_line.setdefault(product.product_id, lineno)
                elif kind == "group":
                    group = _parse_group_record(obj)
                    existing_group = groups.get(group.group_id)
                    if existing_group is not None and existing_group != group:
                        raise IngestError(
                            f"duplicate group_id {group.group_id!r} conflicts with "
                            f"line {group_line[group.group_id]}",
                            line=lineno,
                        )
                    groups[group.group_id] = group
                    group_line.setdefault(group.group_id, lineno)
                else:
                    raise DataError(f"unknown record type {kind!r}")
            except IngestError:
                raise
            except DataError as exc:
                report.errors.append((lineno, str(exc)))

    try:
        store = CatalogStore.build(list(products.values()), list(groups.values()))
    except DataError as exc:
        raise IngestError(str(exc)) from exc
    report.n_products = len(store.products)
    report.n_groups = len(store.groups)
    store.report = report
    return store


def product_record(product: Product) -> dict:
    return {
        "record": "product",
        "product_id": product.product_id,
        "brand": product.brand,
        "product_type": product.product_type,
        "attributes": [{"key": k, "value": v} for k, v in product.attributes],
        "source_url": product.source_url,
    }


def group_record(group: VariationGroup) -> dict:
    return {
        "record": "group",
        "group_id": group.group_id,
        "member_ids": list(group.member_ids),
        "gold_variation_keys": list(group.gold_variation_keys)
        if group.gold_variation_keys is not None
        else None,
    }


def export_catalog(
    store: CatalogStore, path: str | Path, extra_meta: dict | None = None
) -> None:
    """Write the store back to the catalog file format (sorted, reproducible)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        if extra_meta:
            handle.write(json.dumps({"record": "meta", **extra_meta}, ensure_ascii=False))
            handle.write("\n")
        for product_id in sorted(store.products):
            handle.write(json.dumps(product_record(store.products[product_id]), ensure_ascii=False))
            handle.write("\n")
        for group_id in sorted(store.groups):
            handle.write(json.dumps(group_record(store.groups[group_id]), ensure_ascii=False))
            handle.write("\n")


def render_product_block(product: Product, index: int) -> str:
    """Render a product as the attribute block used inside prompts.

    Example::

        <product 1>
        brand = acme,
        color = red,
        </product 1>
    """
    lines = [f"<product {index}>"]
    lines.extend(f"{key} = {value}," for key, value in product.attributes)
    lines.append(f"</product {index}>")
    return "\n".join(lines)


def strip_report(store: CatalogStore) -> CatalogStore:
    """Copy of the store without the ingest report (for equality checks)."""
    return replace(store, report=None)

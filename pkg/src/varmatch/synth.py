"""Seeded synthetic catalog generator for desk-scale testing.

Every generated variation group is decidable by construction: members share
brand, product_type and all common-key values, and differ pairwise on every
planted variation key. Per-product serial keys (unique to each product) are
recorded as gold variation keys; per-group serial keys (shared by members,
unique to the group) are common.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .catalog import CatalogStore, Product, VariationGroup
from .errors import DataError

TYPE_NAMES = (
    "keyboard", "dress", "ring", "watch", "snack", "monitor",
    "lamp", "backpack", "blender", "sneaker", "headphone", "sofa",
)
BRAND_NAMES = (
    "acme", "zenco", "nordia", "veltrix", "oakline", "pyrus", "quanta",
    "solvex", "tundra", "ultivo", "vanta", "wexford", "xelia", "yonder",
    "arbor", "bristol", "corvid", "dalton", "everly", "fenwick",
    "gable", "harlow", "ivory", "juniper",
)
VALUE_VOCAB: dict[str, tuple[str, ...]] = {
    "color": (
        "red", "blue", "green", "black", "white", "silver", "navy", "teal",
        "maroon", "olive", "orange", "purple", "yellow", "gray", "pink",
        "brown", "beige", "cyan", "magenta", "gold",
    ),
    "size": (
        "xs", "s", "m", "l", "xl", "xxl", "3xl", "28", "30", "32", "34",
        "36", "38", "40", "42", "6", "8", "10", "12", "one size",
    ),
    "flavor": (
        "vanilla", "chocolate", "strawberry", "mango", "lemon", "mint",
        "coffee", "caramel", "peach", "apple", "cherry", "coconut",
        "hazelnut", "banana", "raspberry", "lime",
    ),
    "material": (
        "cotton", "linen", "silk", "wool", "leather", "denim", "polyester",
        "nylon", "cashmere", "suede", "canvas", "velvet", "satin", "bamboo",
        "hemp", "fleece",
    ),
}
GENERIC_WORDS = (
    "apex", "bolt", "cedar", "delta", "ember", "flint", "grove", "halo",
    "iris", "juno", "koda", "lumen", "mesa", "nova", "onyx", "pico",
    "quill", "ridge", "sol", "tide", "umber", "vale", "wren", "zephyr",
)


def value_vocabulary(key: str) -> tuple[str, ...]:
    return VALUE_VOCAB.get(key, GENERIC_WORDS)


@dataclass(frozen=True)
class SynthSpec:
    """Shape of a synthetic catalog; all counts are per enclosing level."""

    n_types: int = 1
    brands_per_type: int = 1
    groups_per_brand: int = 1
    group_size_range: tuple[int, int] = (2, 4)
    # int for a fixed count per group, or (lo, hi) for a seeded range
    variation_keys_per_group: int | tuple[int, int] = 1
    variation_key_pool: tuple[str, ...] = ("color", "size", "flavor", "material", "style")
    common_keys: tuple[str, ...] = ("fabric", "origin")
    # vocabulary slices: small slices raise cross-group value collisions, which
    # keeps token-overlap baselines imperfect on purpose (None: full vocabulary)
    common_value_choices: int = 8
    variation_value_choices: int | None = None
    per_group_keys: tuple[str, ...] = ()
    per_product_keys: tuple[str, ...] = ()

    def validate(self) -> None:
        problems = []
        if self.n_types < 1:
            problems.append("n_types must be >= 1")
        if self.brands_per_type < 1:
            problems.append("brands_per_type must be >= 1")
        if self.groups_per_brand < 1:
            problems.append("groups_per_brand must be >= 1")
        lo, hi = self.group_size_range
        if lo < 1 or hi < lo:
            problems.append("group_size_range must satisfy 1 <= min <= max")
        klo, khi = self._variation_key_range()
        if klo < 0 or khi < klo:
            problems.append("variation_keys_per_group must be >= 0")
        if khi > len(self.variation_key_pool):
            problems.append("variation_keys_per_group exceeds the variation_key_pool")
        if problems:
            raise DataError("invalid SynthSpec: " + "; ".join(problems))

    def _variation_key_range(self) -> tuple[int, int]:
        if isinstance(self.variation_keys_per_group, tuple):
            return self.variation_keys_per_group
        return (self.variation_keys_per_group, self.variation_keys_per_group)


@dataclass
class _Serials:
    group: int = 0
    product: int = 0
    counters: dict[str, int] = field(default_factory=dict)

    def next_serial(self, key: str) -> str:
        n = self.counters.get(key, 0)
        self.counters[key] = n + 1
        return f"{key[:2]}-{n:05d}"


def _type_name(i: int) -> str:
    return TYPE_NAMES[i] if i < len(TYPE_NAMES) else f"type{i:03d}"


def _brand_name(i: int) -> str:
    return BRAND_NAMES[i] if i < len(BRAND_NAMES) else f"brand{i:03d}"


def synth_catalog(spec: SynthSpec, seed: int) -> CatalogStore:
    """Deterministically generate a catalog satisfying the spec's structure."""
    spec.validate()
    rng = random.Random(seed)
    serials = _Serials()
    products: list[Product] = []
    groups: list[VariationGroup] = []
    size_lo, size_hi = spec.group_size_range
    key_lo, key_hi = spec._variation_key_range()

    for type_index in range(spec.n_types):
        product_type = _type_name(type_index)
        for brand_offset in range(spec.brands_per_type):
            brand = _brand_name(type_index * spec.brands_per_type + brand_offset)
            for _ in range(spec.groups_per_brand):
                size = rng.randint(size_lo, size_hi)
                n_keys = rng.randint(key_lo, key_hi)
                variation_keys = sorted(rng.sample(spec.variation_key_pool, n_keys))

                group_values: dict[str, list[str]] = {}
                for key in variation_keys:
                    vocab = value_vocabulary(key)
                    if spec.variation_value_choices is not None:
                        vocab = vocab[: spec.variation_value_choices]
                    if size > len(vocab):
                        raise DataError(
                            f"group size {size} needs more distinct {key!r} values "
                            f"than the vocabulary provides ({len(vocab)})"
                        )
                    group_values[key] = rng.sample(vocab, size)

                common_values = {
                    key: rng.choice(value_vocabulary(key)[: spec.common_value_choices])
                    for key in spec.common_keys
                }
                group_serials = {key: serials.next_serial(key) for key in spec.per_group_keys}

                member_ids = []
                for position in range(size):
                    product_id = f"p{serials.product:06d}"
                    serials.product += 1
                    attributes: list[tuple[str, str]] = [
                        ("brand", brand),
                        ("product_type", product_type),
                    ]
                    attributes.extend(group_serials.items())
                    attributes.extend(common_values.items())
                    attributes.extend((key, group_values[key][position]) for key in variation_keys)
                    attributes.extend(
                        (key, serials.next_serial(key)) for key in spec.per_product_keys
                    )
                    products.append(Product.build(product_id, attributes))
                    member_ids.append(product_id)

                group_id = f"g{serials.group:05d}"
                serials.group += 1
                groups.append(
                    VariationGroup.build(
                        group_id,
                        member_ids,
                        gold_variation_keys=sorted(
                            set(variation_keys) | set(spec.per_product_keys)
                        ),
                    )
                )
    return CatalogStore.build(products, groups)

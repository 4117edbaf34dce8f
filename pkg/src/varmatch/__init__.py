"""Variant-product matching toolkit.

Builds labeled pair datasets from webpage co-listing structure, scores
variant-match relationships through pluggable classifier backends, and
identifies variation vs. common attributes across variant groups.
"""

__version__ = "0.1.0"

from .catalog import (
    CatalogStore,
    Product,
    VariationGroup,
    export_catalog,
    ingest_catalog,
)
from .errors import (
    ConfigError,
    DataError,
    IngestError,
    PoolExhaustedError,
    ResponseParseError,
    TransportError,
    VarmatchError,
)
from .pairforge import (
    DatasetSplit,
    LabeledPair,
    NegativeMix,
    SerializedPair,
    export_pairs,
    extract_positive_pairs,
    read_pairs,
    sample_negatives,
    sample_random_negatives,
    serialize_pair,
    split_dataset,
)
from .synth import SynthSpec, synth_catalog

__all__ = [
    "CatalogStore",
    "ConfigError",
    "DataError",
    "DatasetSplit",
    "IngestError",
    "LabeledPair",
    "NegativeMix",
    "PoolExhaustedError",
    "Product",
    "ResponseParseError",
    "SerializedPair",
    "SynthSpec",
    "TransportError",
    "VariationGroup",
    "VarmatchError",
    "export_catalog",
    "export_pairs",
    "extract_positive_pairs",
    "ingest_catalog",
    "read_pairs",
    "sample_negatives",
    "sample_random_negatives",
    "serialize_pair",
    "split_dataset",
    "synth_catalog",
]

"""Encoder fine-tuning and serving sidecar for the varmatch wire protocol."""

__version__ = "0.1.0"

from .data import PairDataset, PairExample, SidecarError, WordVocab, load_pair_file
from .model import PairScorer
from .train import TrainConfig, finetune

__all__ = [
    "PairDataset",
    "PairExample",
    "PairScorer",
    "SidecarError",
    "TrainConfig",
    "WordVocab",
    "finetune",
    "load_pair_file",
]

"""Evaluation metrics and experiment runners.

Conventions: variant_match is the positive class everywhere; zero-denominator
metrics are reported as 0.0 with a flag instead of raising; AUROC is the
rank statistic with half credit for ties, computed from integer win/tie
counts so it agrees exactly with a brute-force pairwise comparison.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

from .attrkit import COMMON, VARIATION
from .catalog import CatalogStore
from .errors import DataError
from .matchkit import ClassifierHandle, MatchScore, MatchVerdict, classify
from .normalize import normalize_key
from .pairforge import (
    MISMATCH,
    VARIANT_MATCH,
    LabeledPair,
    NegativeMix,
    extract_positive_pairs,
    sample_negatives,
    sample_random_negatives,
    split_dataset,
)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    n: int
    auroc: float | None = None
    config_digest: str = ""
    flags: tuple[str, ...] = ()

    def as_row(self) -> dict:
        return {
            "config_digest": self.config_digest,
            "n": self.n,
            "auroc": self.auroc,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "flags": ",".join(self.flags),
        }


def confusion(verdicts: Sequence[MatchVerdict], gold: Sequence[str]) -> ConfusionCounts:
    """Count the confusion matrix with variant_match as the positive class."""
    if len(verdicts) != len(gold):
        raise DataError(f"length mismatch: {len(verdicts)} verdicts vs {len(gold)} labels")
    tp = fp = fn = tn = 0
    for verdict, truth in zip(verdicts, gold):
        predicted_positive = verdict.label == VARIANT_MATCH
        actual_positive = truth == VARIANT_MATCH
        if predicted_positive and actual_positive:
            tp += 1
        elif predicted_positive:
            fp += 1
        elif actual_positive:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp, fp, fn, tn)


def basic_metrics(counts: ConfusionCounts, config_digest: str = "") -> MetricsReport:
    """Accuracy/precision/recall/F1 from confusion counts (AUROC unset)."""
    total = counts.total
    if total == 0:
        raise DataError("cannot compute metrics over zero pairs")
    flags = []
    if counts.tp + counts.fp == 0:
        precision = 0.0
        flags.append("precision_undefined")
    else:
        precision = counts.tp / (counts.tp + counts.fp)
    if counts.tp + counts.fn == 0:
        recall = 0.0
        flags.append("recall_undefined")
    else:
        recall = counts.tp / (counts.tp + counts.fn)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return MetricsReport(
        accuracy=(counts.tp + counts.tn) / total,
        precision=precision,
        recall=recall,
        f1=f1,
        n=total,
        config_digest=config_digest,
        flags=tuple(flags),
    )


def _rank_counts(scores: Sequence[float], gold: Sequence[str]) -> tuple[int, int, int, int]:
    """Integer (wins, ties, n_pos, n_neg) over all positive-negative pairs."""
    pos = sorted(s for s, g in zip(scores, gold) if g == VARIANT_MATCH)
    neg = sorted(s for s, g in zip(scores, gold) if g != VARIANT_MATCH)
    wins = ties = 0
    i = j = 0
    below = 0  # negatives strictly below the current positive
    while i < len(pos):
        while j < len(neg) and neg[j] < pos[i]:
            below += 1
            j += 1
        equal = 0
        k = j
        while k < len(neg) and neg[k] == pos[i]:
            equal += 1
            k += 1
        wins += below
        ties += equal
        i += 1
    return wins, ties, len(pos), len(neg)


def auroc(scores: Sequence[float], gold: Sequence[str]) -> float:
    """Probability a random positive outscores a random negative (ties: half).

    Equals the pairwise Mann-Whitney statistic exactly: win and tie counts are
    integers, so the result matches a brute-force O(P*N) sweep bit for bit.
    """
    if len(scores) != len(gold):
        raise DataError(f"length mismatch: {len(scores)} scores vs {len(gold)} labels")
    wins, ties, n_pos, n_neg = _rank_counts(scores, gold)
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUROC undefined: need at least one positive and one negative")
    return (wins + 0.5 * ties) / (n_pos * n_neg)


def variation_recall(
    predicted_variation: set[str] | Sequence[str],
    gold_structured_variation: set[str] | Sequence[str],
    filter_keys: set[str] | Sequence[str] | None = None,
) -> float | None:
    """Recall of gold structured variation keys; extra predictions are free.

    Returns None when the (optionally filtered) gold set is empty, so callers
    can tally skipped groups instead of failing.
    """
    predicted = {normalize_key(name) for name in predicted_variation}
    gold = {normalize_key(name) for name in gold_structured_variation}
    if filter_keys is not None:
        gold &= {normalize_key(name) for name in filter_keys}
    if not gold:
        return None
    return len(predicted & gold) / len(gold)


@dataclass
class RecallSummary:
    mean_recall: float
    n_groups: int
    skipped: int


def summarize_recall(
    per_group: Sequence[tuple[set[str] | Sequence[str], set[str] | Sequence[str]]],
    filter_keys: set[str] | Sequence[str] | None = None,
) -> RecallSummary:
    """Mean per-group variation recall, tallying gold-empty groups as skipped."""
    values = []
    skipped = 0
    for predicted, gold in per_group:
        value = variation_recall(predicted, gold, filter_keys)
        if value is None:
            skipped += 1
        else:
            values.append(value)
    mean = sum(values) / len(values) if values else 0.0
    return RecallSummary(mean_recall=mean, n_groups=len(values), skipped=skipped)


@dataclass
class ClassAccuracy:
    correct: int
    total: int

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else 0.0


@dataclass
class AttrAccuracyReport:
    common: ClassAccuracy
    variation: ClassAccuracy

    @property
    def overall(self) -> ClassAccuracy:
        return ClassAccuracy(
            self.common.correct + self.variation.correct,
            self.common.total + self.variation.total,
        )


def attr_accuracy(
    predicted: Mapping[str, str],
    gold: Mapping[str, str],
) -> AttrAccuracyReport:
    """Per-class and overall accuracy over the gold-labeled attribute keys.

    Gold keys missing from the prediction count as incorrect.
    """
    if not gold:
        raise DataError("attr_accuracy requires a non-empty gold label map")
    predicted = {normalize_key(k): v for k, v in predicted.items()}
    tallies = {COMMON: ClassAccuracy(0, 0), VARIATION: ClassAccuracy(0, 0)}
    for raw_key, gold_label in gold.items():
        key = normalize_key(raw_key)
        if gold_label not in tallies:
            raise DataError(f"gold label for {key!r} must be variation or common")
        bucket = tallies[gold_label]
        bucket.total += 1
        if predicted.get(key) == gold_label:
            bucket.correct += 1
    return AttrAccuracyReport(common=tallies[COMMON], variation=tallies[VARIATION])


@dataclass
class CurvePoint:
    train_size: int
    metrics: MetricsReport
    sampler: str
    backend_id: str


BackendFactory = Callable[[list[LabeledPair]], ClassifierHandle]


def learning_curve(
    store: CatalogStore,
    sizes: Sequence[int],
    backend: ClassifierHandle | BackendFactory,
    seed: int,
    mix: NegativeMix | None = None,
    sampler: str = "informed",
    ratio: float = 0.7,
    threshold: float = 0.5,
    config_digest: str = "",
) -> list[CurvePoint]:
    """Metrics on a fixed eval split as a function of training-set size.

    `backend` is either a ready handle (size-indifferent backends yield flat
    curves) or a factory called with each size's training pairs. The eval set
    is built once, so points differ only in the training subset.
    """
    if list(sizes) != sorted(sizes) or any(s <= 0 for s in sizes):
        raise DataError("sizes must be positive and ascending")
    positives = extract_positive_pairs(store)
    if sampler == "informed":
        negatives = sample_negatives(store, positives, mix or NegativeMix(), len(positives), seed)
    elif sampler == "random":
        negatives = sample_random_negatives(store, positives, len(positives), seed)
    else:
        raise DataError(f"unknown sampler {sampler!r}")
    split = split_dataset(positives + negatives, ratio, seed)

    points: list[CurvePoint] = []
    for size in sizes:
        if size > len(split.train):
            raise DataError(
                f"train size {size} exceeds available training pairs ({len(split.train)})"
            )
        subset_rng = random.Random(seed ^ size)
        subset = _balanced_subset(split.train, size, subset_rng)
        handle = backend(subset) if callable(backend) else backend
        scores = [
            s.probability
            for s in handle.score_batch(
                [(store.products[p.left_id], store.products[p.right_id]) for p in split.eval]
            )
        ]
        gold = [p.label for p in split.eval]
        verdicts = [classify_score(prob, threshold) for prob in scores]
        report = basic_metrics(confusion(verdicts, gold), config_digest)
        try:
            report.auroc = auroc(scores, gold)
        except DataError:
            report.auroc = None
        points.append(
            CurvePoint(
                train_size=size,
                metrics=report,
                sampler=sampler,
                backend_id=handle.kind,
            )
        )
    return points


def classify_score(probability: float, threshold: float) -> MatchVerdict:
    return classify(MatchScore(probability=probability, source="curve"), threshold)


def _balanced_subset(
    pairs: list[LabeledPair], size: int, rng: random.Random
) -> list[LabeledPair]:
    """Class-balanced random subset of exactly `size` pairs (order preserved)."""
    pos_idx = [i for i, p in enumerate(pairs) if p.label == VARIANT_MATCH]
    neg_idx = [i for i, p in enumerate(pairs) if p.label == MISMATCH]
    if not pos_idx or not neg_idx:
        chosen = set(rng.sample(range(len(pairs)), size))
    else:
        take_pos = min(size // 2 + size % 2, len(pos_idx))
        take_neg = min(size - take_pos, len(neg_idx))
        if take_pos + take_neg < size:
            take_pos = min(size - take_neg, len(pos_idx))
        chosen = set(rng.sample(pos_idx, take_pos)) | set(rng.sample(neg_idx, take_neg))
    return [pairs[i] for i in sorted(chosen)]

"""Report writers: JSON/CSV rows plus rendered matplotlib figures.

Column orders are fixed so downstream tooling can rely on them:

  metrics CSV : kind, config_digest, seed, n, auroc, accuracy, precision,
                recall, f1, skipped, flags
  curve CSV   : train_size, sampler, backend, auroc, accuracy, precision,
                recall, f1, n, config_digest
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evalkit import CurvePoint

METRICS_COLUMNS = (
    "kind",
    "config_digest",
    "seed",
    "n",
    "auroc",
    "accuracy",
    "precision",
    "recall",
    "f1",
    "skipped",
    "flags",
)
CURVE_COLUMNS = (
    "train_size",
    "sampler",
    "backend",
    "auroc",
    "accuracy",
    "precision",
    "recall",
    "f1",
    "n",
    "config_digest",
)


def write_json(payload: object, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def write_csv(rows: Sequence[Mapping], columns: Sequence[str], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(columns), extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({col: row.get(col, "") for col in columns})


def curve_rows(points: Sequence[CurvePoint], seed: int | None = None) -> list[dict]:
    rows = []
    for point in points:
        row = {
            "train_size": point.train_size,
            "sampler": point.sampler,
            "backend": point.backend_id,
            "n": point.metrics.n,
            "config_digest": point.metrics.config_digest,
            "auroc": point.metrics.auroc,
            "accuracy": point.metrics.accuracy,
            "precision": point.metrics.precision,
            "recall": point.metrics.recall,
            "f1": point.metrics.f1,
        }
        if seed is not None:
            row["seed"] = seed
        rows.append(row)
    return rows


def bar_figure(values: Mapping[str, float], path: str | Path, title: str = "") -> None:
    """Render metric name -> value bars to an image file."""
    names = list(values)
    heights = [values[name] for name in names]
    fig, ax = plt.subplots(figsize=(max(4.0, 1.1 * len(names)), 3.2))
    ax.bar(names, heights, color="#4878a8")
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("value")
    if title:
        ax.set_title(title)
    for index, height in enumerate(heights):
        ax.text(index, height + 0.01, f"{height:.3f}", ha="center", fontsize=8)
    ax.tick_params(axis="x", rotation=30)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def curve_figure(points: Sequence[CurvePoint], path: str | Path, title: str = "") -> None:
    """Plot metrics against training-set size, one line per available metric."""
    sizes = [point.train_size for point in points]
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    series = {
        "AUROC": [p.metrics.auroc for p in points],
        "accuracy": [p.metrics.accuracy for p in points],
        "F1": [p.metrics.f1 for p in points],
    }
    for name, values in series.items():
        if all(v is not None for v in values):
            ax.plot(sizes, values, marker="o", label=name)
    ax.set_xlabel("training pairs")
    ax.set_ylabel("metric")
    ax.set_xscale("log")
    ax.set_ylim(0.0, 1.05)
    ax.legend(loc="lower right", fontsize=8)
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)

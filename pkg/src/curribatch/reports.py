"""Diagnostic reports: per-task underfitting ratios with severity bands,
margin histograms, and order-quality comparisons against random orders.

A task's underfitting ratio is the fraction of its instances whose margin
is strictly below the threshold (default 0.05). Severity bands: severe
for ratio > 0.8, moderate for 0.5 < ratio <= 0.8, mild for ratio <= 0.5;
boundary ratios land in the lower-severity band.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .annealing import TaskOrder, tour_score
from .corpus import Corpus
from .errors import MarginCoverageMismatch
from .similarity import SimilarityMatrix

SEVERE = "severe"
MODERATE = "moderate"
MILD = "mild"

DEFAULT_MARGIN_THRESHOLD = 0.05


def severity_band(ratio: float) -> str:
    if ratio > 0.8:
        return SEVERE
    if ratio > 0.5:
        return MODERATE
    return MILD


@dataclass(frozen=True)
class TaskUnderfit:
    task_id: int
    name: str
    instance_count: int
    underfit_count: int
    ratio: float
    severity: str

    def as_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "name": self.name,
            "instance_count": self.instance_count,
            "underfit_count": self.underfit_count,
            "ratio": self.ratio,
            "severity": self.severity,
        }


@dataclass(frozen=True)
class UnderfittingReport:
    per_task: tuple[TaskUnderfit, ...]
    margin_threshold: float

    def as_dict(self) -> dict:
        return {
            "margin_threshold": self.margin_threshold,
            "severity_bands": {
                "severe": "ratio > 0.8",
                "moderate": "0.5 < ratio <= 0.8",
                "mild": "ratio <= 0.5",
            },
            "per_task": [t.as_dict() for t in self.per_task],
        }

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.as_dict(), indent=2) + "\n", encoding="utf-8")

    def to_table(self) -> str:
        lines = [f"{'task':>6} {'name':<20} {'n':>7} {'underfit':>9} {'ratio':>7} severity"]
        for t in self.per_task:
            lines.append(
                f"{t.task_id:>6} {t.name:<20.20} {t.instance_count:>7} "
                f"{t.underfit_count:>9} {t.ratio:>7.3f} {t.severity}"
            )
        return "\n".join(lines)

    def to_gnuplot(self, path) -> None:
        """Whitespace-separated data file: task_id ratio."""
        lines = ["# task_id ratio"]
        lines += [f"{t.task_id} {t.ratio:.6f}" for t in self.per_task]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def underfitting_report(
    corpus: Corpus,
    margins: Mapping[int, np.ndarray],
    threshold: float = DEFAULT_MARGIN_THRESHOLD,
) -> UnderfittingReport:
    """Per-task count of instances with margin strictly below `threshold`.

    `margins` maps task_id to that task's margins in instance order and
    must cover every instance.
    """
    per_task = []
    for task in corpus.tasks:
        if task.task_id not in margins:
            raise MarginCoverageMismatch(f"no margins for task {task.task_id}")
        m = np.asarray(margins[task.task_id], dtype=np.float64)
        if m.shape[0] != len(task):
            raise MarginCoverageMismatch(
                f"task {task.task_id}: {m.shape[0]} margins for {len(task)} instances"
            )
        underfit = int((m < threshold).sum())
        ratio = underfit / len(task)
        per_task.append(
            TaskUnderfit(
                task_id=task.task_id,
                name=task.name,
                instance_count=len(task),
                underfit_count=underfit,
                ratio=ratio,
                severity=severity_band(ratio),
            )
        )
    return UnderfittingReport(per_task=tuple(per_task), margin_threshold=float(threshold))


@dataclass(frozen=True)
class OrderQuality:
    order_score: float
    random_scores: tuple[float, ...]
    quantile: float

    def as_dict(self) -> dict:
        return {
            "order_score": self.order_score,
            "random_scores": list(self.random_scores),
            "quantile": self.quantile,
        }

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.as_dict(), indent=2) + "\n", encoding="utf-8")


def order_quality(
    order: TaskOrder, matrix: SimilarityMatrix, random_trials: int = 100, seed: int = 0
) -> OrderQuality:
    """Tour score of `order` against `random_trials` seeded random
    permutations; quantile = fraction of random scores <= order score."""
    if random_trials < 1:
        raise ValueError(f"random_trials must be >= 1, got {random_trials}")
    score = tour_score(order.order, matrix)
    rng = np.random.default_rng(seed)
    scores = tuple(
        tour_score(rng.permutation(matrix.m), matrix) for _ in range(random_trials)
    )
    quantile = sum(1 for s in scores if s <= score) / random_trials
    return OrderQuality(order_score=score, random_scores=scores, quantile=quantile)


@dataclass(frozen=True)
class MarginHistogram:
    bin_edges: tuple[float, ...]
    counts: tuple[int, ...]

    def as_dict(self) -> dict:
        return {"bin_edges": list(self.bin_edges), "counts": list(self.counts)}

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.as_dict(), indent=2) + "\n", encoding="utf-8")


def margin_histogram(margins, bin_count: int) -> MarginHistogram:
    """Histogram of margins over the full [-2, 2] range; counts sum to N."""
    if bin_count < 1:
        raise ValueError(f"bin_count must be >= 1, got {bin_count}")
    counts, edges = np.histogram(
        np.asarray(margins, dtype=np.float64), bins=bin_count, range=(-2.0, 2.0)
    )
    return MarginHistogram(
        bin_edges=tuple(float(e) for e in edges), counts=tuple(int(c) for c in counts)
    )

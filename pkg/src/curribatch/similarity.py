"""Task representations, the pairwise task-similarity matrix, and the
interference-risk relation consumed by the annealer."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import TaskDataset
from .errors import DimensionMismatch, ZeroVector

DEFAULT_SAMPLE_SIZE = 256


def cosine_similarity(a, b) -> float:
    """aᵀb / (‖a‖·‖b‖), computed in double precision."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"vector shapes differ: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine similarity undefined for the all-zero vector")
    return float(np.dot(a, b) / (na * nb))


@dataclass(frozen=True)
class TaskRepresentation:
    """Mean of sampled query embeddings, standing in for the whole task."""

    task_id: int
    vector: np.ndarray
    sample_count: int


def task_representation(task: TaskDataset, n_t: int = DEFAULT_SAMPLE_SIZE, seed: int = 0) -> TaskRepresentation:
    """Mean of min(n_t, |task|) query embeddings sampled without replacement.

    Deterministic given (task, n_t, seed); accumulation is double precision.
    """
    if n_t < 1:
        raise ValueError(f"n_t must be >= 1, got {n_t}")
    rng = np.random.default_rng(seed)
    k = min(n_t, len(task))
    rows = rng.choice(len(task), size=k, replace=False)
    mean = task.queries[np.sort(rows)].astype(np.float64).mean(axis=0)
    return TaskRepresentation(task_id=task.task_id, vector=mean, sample_count=k)


@dataclass(frozen=True)
class SimilarityMatrix:
    """Symmetric m×m cosine-similarity matrix over task representations."""

    entries: np.ndarray
    task_ids: tuple[int, ...]

    @property
    def m(self) -> int:
        return len(self.task_ids)

    def to_json(self, path) -> None:
        payload = {
            "task_ids": list(self.task_ids),
            "entries": [[float(x) for x in row] for row in self.entries],
        }
        Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def from_json(cls, path) -> "SimilarityMatrix":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            entries=np.array(payload["entries"], dtype=np.float64),
            task_ids=tuple(int(t) for t in payload["task_ids"]),
        )


def similarity_matrix(reps: Sequence[TaskRepresentation]) -> SimilarityMatrix:
    """Pairwise cosine similarities; upper triangle computed, then mirrored."""
    if not reps:
        raise ValueError("need at least one task representation")
    m = len(reps)
    entries = np.empty((m, m), dtype=np.float64)
    for i in range(m):
        for j in range(i, m):
            entries[i, j] = cosine_similarity(reps[i].vector, reps[j].vector)
            entries[j, i] = entries[i, j]
    return SimilarityMatrix(entries=entries, task_ids=tuple(r.task_id for r in reps))


def interference_risk(sim: float) -> float:
    """Cross-task interference risk, strictly decreasing in similarity."""
    return -float(sim)

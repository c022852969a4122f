"""Instance difficulty scoring, easy-to-difficult ordering, and the
noise mask.

Difficulty is the margin sim(query, positive) - sim(query, negative):
large margins are easy, small or negative margins are hard and, at the
extreme, likely mislabeled. Two mask policies exist:

* ``mask-noisy`` (default): mask (0) when margin < delta, keep (1)
  otherwise. Masks the probable label-noise tail.
* ``mask-easy``: mask when margin >= delta, keep otherwise. The inverse
  convention, provided so either reading of the threshold rule can be
  reproduced; it masks the easy instances instead.

Exactly one policy is active per run and is recorded in provenance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import InstanceTriple, TaskDataset
from .errors import ZeroVector
from .similarity import cosine_similarity

MASK_NOISY = "mask-noisy"
MASK_EASY = "mask-easy"
MASK_POLICIES = (MASK_NOISY, MASK_EASY)
DEFAULT_DELTA = -0.1


@dataclass(frozen=True)
class DifficultyRecord:
    task_id: int
    instance_id: int
    margin: float
    mask: int


def instance_difficulty(triple: InstanceTriple) -> float:
    """Margin sim(q, s+) - sim(q, s-); smaller = harder."""
    return cosine_similarity(triple.query, triple.positive) - cosine_similarity(
        triple.query, triple.negative
    )


def noise_mask(margin: float, delta: float = DEFAULT_DELTA, policy: str = MASK_NOISY) -> int:
    if policy == MASK_NOISY:
        return 0 if margin < delta else 1
    if policy == MASK_EASY:
        return 0 if margin >= delta else 1
    raise ValueError(f"unknown mask policy: {policy!r} (expected one of {MASK_POLICIES})")


def task_margins(task: TaskDataset) -> np.ndarray:
    """Margins for every instance of a task, in instance order (vectorized)."""
    emb = task.embeddings.astype(np.float64)
    q, p, n = emb[:, 0, :], emb[:, 1, :], emb[:, 2, :]
    nq = np.linalg.norm(q, axis=1)
    np_ = np.linalg.norm(p, axis=1)
    nn = np.linalg.norm(n, axis=1)
    if (nq == 0).any() or (np_ == 0).any() or (nn == 0).any():
        raise ZeroVector(f"task {task.task_id}: zero vector encountered")
    sim_pos = np.einsum("ij,ij->i", q, p) / (nq * np_)
    sim_neg = np.einsum("ij,ij->i", q, n) / (nq * nn)
    return sim_pos - sim_neg


def sort_task_instances(
    task: TaskDataset, delta: float = DEFAULT_DELTA, policy: str = MASK_NOISY
) -> list[DifficultyRecord]:
    """Difficulty records sorted easy-to-difficult (margin non-increasing),
    ties broken by ascending instance_id."""
    margins = task_margins(task)
    ids = task.instance_ids
    rank = np.lexsort((ids, -margins))
    return [
        DifficultyRecord(
            task_id=task.task_id,
            instance_id=int(ids[r]),
            margin=float(margins[r]),
            mask=noise_mask(float(margins[r]), delta, policy),
        )
        for r in rank
    ]


def write_difficulty_jsonl(records, path) -> None:
    """One record per line: {task_id, instance_id, margin, mask}."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(
                json.dumps(
                    {
                        "task_id": rec.task_id,
                        "instance_id": rec.instance_id,
                        "margin": rec.margin,
                        "mask": rec.mask,
                    }
                )
                + "\n"
            )


def read_difficulty_jsonl(path) -> list[DifficultyRecord]:
    records = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        records.append(
            DifficultyRecord(
                task_id=int(obj["task_id"]),
                instance_id=int(obj["instance_id"]),
                margin=float(obj["margin"]),
                mask=int(obj["mask"]),
            )
        )
    return records

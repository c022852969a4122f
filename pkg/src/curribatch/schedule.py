"""Combine the task-level order and per-task instance sort into the final
mini-batch training schedule.

Each task's sorted instances are cut into contiguous batches of at most B
(last batch may be short, never dropped). Emission then sweeps the task
order round-robin, taking each task's next unconsumed batch and skipping
exhausted tasks, until every batch is out. The schedule file stores
instance references, not embeddings; the trainer joins against the corpus.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .corpus import Corpus, ValidationReport
from .difficulty import DifficultyRecord, task_margins
from .errors import EmptyCorpus, MalformedSchedule, OrderCorpusMismatch


@dataclass(frozen=True)
class MiniBatch:
    task_id: int
    instance_ids: tuple[int, ...]
    masks: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.instance_ids)


@dataclass(frozen=True)
class BatchSchedule:
    batches: tuple[MiniBatch, ...]
    batch_size: int
    provenance: dict


def build_schedule(
    corpus: Corpus,
    task_order: Sequence[int],
    sorted_records: Mapping[int, Sequence[DifficultyRecord]],
    batch_size: int,
    provenance: dict | None = None,
) -> BatchSchedule:
    """Partition each task's sorted records into batches and interleave them
    along `task_order` (a sequence of task ids), round-robin with skips."""
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    if corpus.num_tasks == 0:
        raise EmptyCorpus("corpus has no tasks")
    if sorted(task_order) != sorted(corpus.task_ids) or len(set(task_order)) != len(task_order):
        raise OrderCorpusMismatch(
            f"order tasks {sorted(task_order)} != corpus tasks {sorted(corpus.task_ids)}"
        )
    missing = [t for t in task_order if t not in sorted_records]
    if missing:
        raise OrderCorpusMismatch(f"no difficulty records for tasks {missing}")

    queues: dict[int, deque[MiniBatch]] = {}
    for tid in task_order:
        records = sorted_records[tid]
        task = corpus.task_by_id(tid)
        if len(records) != len(task):
            raise OrderCorpusMismatch(
                f"task {tid}: {len(records)} records for {len(task)} instances"
            )
        q: deque[MiniBatch] = deque()
        for start in range(0, len(records), batch_size):
            chunk = records[start : start + batch_size]
            q.append(
                MiniBatch(
                    task_id=tid,
                    instance_ids=tuple(r.instance_id for r in chunk),
                    masks=tuple(r.mask for r in chunk),
                )
            )
        queues[tid] = q

    batches: list[MiniBatch] = []
    while any(queues[t] for t in task_order):
        for tid in task_order:
            if queues[tid]:
                batches.append(queues[tid].popleft())

    prov = dict(provenance or {})
    prov.setdefault("task_order", [int(t) for t in task_order])
    prov.setdefault("batch_size", int(batch_size))
    prov.setdefault("tie_break", "instance_id")
    return BatchSchedule(batches=tuple(batches), batch_size=int(batch_size), provenance=prov)


def _expected_emission(task_order, counts) -> list[int]:
    remaining = dict(counts)
    out = []
    while any(remaining[t] for t in task_order):
        for tid in task_order:
            if remaining[tid]:
                out.append(tid)
                remaining[tid] -= 1
    return out


def verify_schedule(schedule: BatchSchedule, corpus: Corpus) -> ValidationReport:
    """Check partition, same-task batches, batch sizes, per-task difficulty
    monotonicity, and round-robin emission. Empty report = valid."""
    report = ValidationReport()
    by_task: dict[int, list[int]] = {t.task_id: [] for t in corpus.tasks}

    for idx, batch in enumerate(schedule.batches):
        if not 1 <= len(batch) <= schedule.batch_size:
            report.add(
                "BatchSize",
                batch.task_id,
                message=f"batch {idx} has {len(batch)} instances (B={schedule.batch_size})",
            )
        if len(batch.masks) != len(batch.instance_ids):
            report.add(
                "MaskLength", batch.task_id, message=f"batch {idx}: mask/instance length mismatch"
            )
        if batch.task_id not in by_task:
            report.add("UnknownTask", batch.task_id, message=f"batch {idx}: task not in corpus")
            continue
        by_task[batch.task_id].extend(batch.instance_ids)

    # partition: every corpus instance exactly once
    for task in corpus.tasks:
        got = by_task[task.task_id]
        want = sorted(int(i) for i in task.instance_ids)
        if sorted(got) != want:
            seen: set[int] = set()
            known = set(want)
            for iid in got:
                if iid not in known:
                    report.add("ForeignInstance", task.task_id, iid, "not a task instance")
                elif iid in seen:
                    report.add("DuplicateInstance", task.task_id, iid, "scheduled twice")
                seen.add(iid)
            for iid in known - set(got):
                report.add("MissingInstance", task.task_id, iid, "never scheduled")

    # within-task margins non-increasing across the concatenated batches
    for task in corpus.tasks:
        got = by_task[task.task_id]
        if sorted(got) != sorted(int(i) for i in task.instance_ids):
            continue  # partition already flagged; margins would be ill-defined
        margins = task_margins(task)
        lookup = {int(i): margins[r] for r, i in enumerate(task.instance_ids)}
        seq = [lookup[i] for i in got]
        for k in range(1, len(seq)):
            if seq[k] > seq[k - 1] + 1e-9:
                report.add(
                    "MarginOrder",
                    task.task_id,
                    got[k],
                    f"margin {seq[k]:.6g} follows smaller {seq[k - 1]:.6g}",
                )
                break

    # round-robin emission order
    task_order = schedule.provenance.get("task_order")
    emission = [b.task_id for b in schedule.batches]
    if task_order is not None and sorted(task_order) == sorted(t.task_id for t in corpus.tasks):
        counts = {tid: emission.count(tid) for tid in task_order}
        if emission != _expected_emission(task_order, counts):
            report.add("RoundRobin", message="emission deviates from round-robin over task_order")
    else:
        # no usable provenance: check the adjacency property directly
        last_pos: dict[int, int] = {}
        remaining = {tid: emission.count(tid) for tid in set(emission)}
        for pos, tid in enumerate(emission):
            if tid in last_pos:
                between = set(emission[last_pos[tid] + 1 : pos])
                alive = {t for t, n in remaining.items() if n > 0 and t != tid}
                if not alive <= between:
                    report.add(
                        "RoundRobin",
                        tid,
                        message=f"batch at {pos} repeats task before others had a turn",
                    )
                    break
            last_pos[tid] = pos
            remaining[tid] -= 1
    return report


def write_schedule(schedule: BatchSchedule, path) -> None:
    """JSONL: line 1 is the provenance header, then one object per batch.

    Output bytes are a pure function of the schedule (stable key order,
    no timestamps), so identical runs produce identical files.
    """
    header = dict(schedule.provenance)
    header.setdefault("batch_size", schedule.batch_size)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for batch in schedule.batches:
            fh.write(
                json.dumps(
                    {
                        "task_id": batch.task_id,
                        "instances": list(batch.instance_ids),
                        "masks": list(batch.masks),
                    }
                )
                + "\n"
            )


def read_schedule(path) -> BatchSchedule:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise MalformedSchedule(f"cannot read schedule {path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise MalformedSchedule(f"schedule file is empty: {path}")
    try:
        header = json.loads(lines[0])
        batch_size = int(header["batch_size"])
        batches = []
        for ln in lines[1:]:
            obj = json.loads(ln)
            instances = tuple(int(i) for i in obj["instances"])
            masks = tuple(int(x) for x in obj["masks"])
            if len(masks) != len(instances):
                raise MalformedSchedule(f"mask/instance length mismatch in {path}")
            batches.append(MiniBatch(task_id=int(obj["task_id"]), instance_ids=instances, masks=masks))
    except MalformedSchedule:
        raise
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise MalformedSchedule(f"cannot parse schedule {path}: {exc}") from exc
    return BatchSchedule(batches=tuple(batches), batch_size=batch_size, provenance=header)

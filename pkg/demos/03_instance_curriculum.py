"""Instance-level curriculum and the mini-batch schedule.

Within each task, instances are scored by the margin
sim(query, positive) - sim(query, negative) and sorted easy-to-difficult.
Instances whose margin falls below a threshold are flagged by a binary
noise mask: they stay in the batch (their sentences still serve as
contrastive candidates) but contribute no loss term. Per-task batch runs
are then interleaved round-robin along the annealed task order.

Run:  python3 demos/03_instance_curriculum.py
"""

import tempfile
from pathlib import Path

import numpy as np

from curribatch import (
    AnnealConfig,
    anneal,
    build_schedule,
    make_synthetic_corpus,
    read_schedule,
    similarity_matrix,
    sort_task_instances,
    task_representation,
    verify_schedule,
    write_schedule,
)

corpus = make_synthetic_corpus(
    num_tasks=4, instances_per_task=30, dimension=16, noise_fraction=0.15, seed=2
)

records = {t.task_id: sort_task_instances(t) for t in corpus.tasks}
first = records[0]
print("task 0, easiest five instances (margin, mask):")
for r in first[:5]:
    print(f"  instance {r.instance_id:3d}  margin={r.margin:+.3f}  mask={r.mask}")
print("task 0, hardest five instances:")
for r in first[-5:]:
    print(f"  instance {r.instance_id:3d}  margin={r.margin:+.3f}  mask={r.mask}")
masked = sum(1 for rs in records.values() for r in rs if r.mask == 0)
print(f"masked (likely-noisy) instances: {masked}/{corpus.num_instances}")

reps = [task_representation(t, n_t=30, seed=i) for i, t in enumerate(corpus.tasks)]
matrix = similarity_matrix(reps)
order = anneal(matrix, AnnealConfig(max_iterations=50_000, seed=0))
task_order = [matrix.task_ids[i] for i in order.order]
print(f"\nannealed task order: {task_order}")

schedule = build_schedule(corpus, task_order, records, batch_size=8)
print(f"schedule: {len(schedule.batches)} batches of size <= {schedule.batch_size}")
print("round-robin task sequence:", [b.task_id for b in schedule.batches])

report = verify_schedule(schedule, corpus)
print(f"verification clean: {report.valid}")

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "schedule.jsonl"
    write_schedule(schedule, path)
    again = read_schedule(path)
    print(f"JSONL round-trip preserves batches: {again.batches == schedule.batches}")

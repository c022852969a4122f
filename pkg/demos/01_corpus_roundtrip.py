"""Corpus data model and on-disk format.

Builds a small synthetic corpus of (query, positive, negative) embedding
triples grouped by task, writes it to the manifest + flat-binary format,
loads it back, and shows that validation catches corrupted data.

Run:  python3 demos/01_corpus_roundtrip.py
"""

import tempfile
from pathlib import Path

import numpy as np

from curribatch import load_corpus, make_synthetic_corpus, save_corpus, validate_corpus

corpus = make_synthetic_corpus(
    num_tasks=4, instances_per_task=50, dimension=16, noise_fraction=0.1, seed=0
)
print(f"built corpus: {corpus.num_tasks} tasks, {corpus.num_instances} instances, D={corpus.dimension}")

with tempfile.TemporaryDirectory() as tmp:
    manifest = Path(tmp) / "manifest.json"
    save_corpus(corpus, manifest)
    print("wrote:", sorted(p.name for p in manifest.parent.iterdir()))

    loaded = load_corpus(manifest)
    exact = all(
        np.array_equal(a.embeddings, b.embeddings)
        for a, b in zip(corpus.tasks, loaded.tasks)
    )
    print(f"round-trip exact (float32 bit-for-bit): {exact}")

    report = validate_corpus(loaded)
    print(f"clean corpus valid: {report.valid}")

    # corrupt one vector and watch validation name the exact instance
    loaded.tasks[1].embeddings[3, 0, :] = 0.0
    report = validate_corpus(loaded)
    print("after zeroing one query vector:")
    for v in report.violations:
        print("  ", v.as_dict())

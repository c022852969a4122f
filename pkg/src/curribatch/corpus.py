"""Embedding-level data model and the on-disk corpus format.

A corpus is a plain-text JSON manifest plus one flat binary file per task.
Each task file holds ``count`` rows of 3*D little-endian float32 values
(query, positive, negative), no header. The manifest declares the shared
embedding dimension D, task names, instruction strings, file paths and
row counts. Vectors are stored exactly as produced by the external
encoder; nothing is re-normalized on load.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateTaskId,
    ManifestError,
    MissingFile,
    NonFiniteValue,
    ZeroVector,
)

ROW_NAMES = ("query", "positive", "negative")


@dataclass(frozen=True)
class Instructions:
    """Opaque instruction strings carried through, never interpreted."""

    query: str = ""
    positive: str = ""
    negative: str = ""


@dataclass(frozen=True)
class InstanceTriple:
    """One training example: query/positive/negative embedding vectors."""

    instance_id: int
    query: np.ndarray
    positive: np.ndarray
    negative: np.ndarray
    query_text: str | None = None
    positive_text: str | None = None
    negative_text: str | None = None

    @property
    def dimension(self) -> int:
        return int(self.query.shape[0])


class TaskDataset:
    """A named task: instruction metadata plus its instance triples.

    Embeddings live in a single (n, 3, D) float32 array (row order
    query/positive/negative) so per-task math vectorizes; `InstanceTriple`
    views are materialized on demand.
    """

    def __init__(self, task_id, name, instructions, embeddings, instance_ids=None):
        embeddings = np.asarray(embeddings)
        if embeddings.ndim != 3 or embeddings.shape[1] != 3:
            raise DimensionMismatch(
                f"task {task_id}: embeddings must have shape (n, 3, D), "
                f"got {embeddings.shape}"
            )
        self.task_id = int(task_id)
        self.name = str(name)
        self.instructions = instructions
        self.embeddings = embeddings
        if instance_ids is None:
            instance_ids = np.arange(embeddings.shape[0], dtype=np.int64)
        self.instance_ids = np.asarray(instance_ids, dtype=np.int64)
        if self.instance_ids.shape[0] != embeddings.shape[0]:
            raise DimensionMismatch(
                f"task {task_id}: {self.instance_ids.shape[0]} instance ids "
                f"for {embeddings.shape[0]} rows"
            )

    @classmethod
    def from_triples(cls, task_id, name, instructions, triples: Sequence[InstanceTriple]):
        emb = np.stack(
            [np.stack([t.query, t.positive, t.negative]) for t in triples]
        ).astype(np.float32)
        ids = np.array([t.instance_id for t in triples], dtype=np.int64)
        return cls(task_id, name, instructions, emb, ids)

    def __len__(self) -> int:
        return int(self.embeddings.shape[0])

    @property
    def dimension(self) -> int:
        return int(self.embeddings.shape[2])

    @property
    def queries(self) -> np.ndarray:
        return self.embeddings[:, 0, :]

    @property
    def positives(self) -> np.ndarray:
        return self.embeddings[:, 1, :]

    @property
    def negatives(self) -> np.ndarray:
        return self.embeddings[:, 2, :]

    def instance(self, row: int) -> InstanceTriple:
        return InstanceTriple(
            instance_id=int(self.instance_ids[row]),
            query=self.embeddings[row, 0],
            positive=self.embeddings[row, 1],
            negative=self.embeddings[row, 2],
        )

    @property
    def instances(self) -> list[InstanceTriple]:
        return [self.instance(i) for i in range(len(self))]

    def row_of(self, instance_id: int) -> int:
        """Row index of an instance id; raises KeyError when absent."""
        rows = np.flatnonzero(self.instance_ids == instance_id)
        if rows.size == 0:
            raise KeyError(instance_id)
        return int(rows[0])


@dataclass(frozen=True)
class Corpus:
    dimension: int
    tasks: tuple[TaskDataset, ...]

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))

    @property
    def num_tasks(self) -> int:
        return len(self.tasks)

    @property
    def num_instances(self) -> int:
        return sum(len(t) for t in self.tasks)

    def task_by_id(self, task_id: int) -> TaskDataset:
        for t in self.tasks:
            if t.task_id == task_id:
                return t
        raise KeyError(task_id)

    @property
    def task_ids(self) -> tuple[int, ...]:
        return tuple(t.task_id for t in self.tasks)


@dataclass(frozen=True)
class Violation:
    kind: str
    task_id: int | None = None
    instance_id: int | None = None
    message: str = ""

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "task_id": self.task_id,
            "instance_id": self.instance_id,
            "message": self.message,
        }


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations

    def add(self, kind, task_id=None, instance_id=None, message=""):
        self.violations.append(Violation(kind, task_id, instance_id, message))

    def to_json(self) -> str:
        return json.dumps(
            {"valid": self.valid, "violations": [v.as_dict() for v in self.violations]},
            indent=2,
        )


def _check_task_vectors(task: TaskDataset, dimension: int, report: ValidationReport):
    if len(task) == 0:
        report.add("EmptyTask", task.task_id, message="task has no instances")
        return
    if task.dimension != dimension:
        report.add(
            "DimensionMismatch",
            task.task_id,
            message=f"task dimension {task.dimension} != corpus dimension {dimension}",
        )
        return
    emb = task.embeddings
    finite = np.isfinite(emb).all(axis=2)
    norms_sq = (emb.astype(np.float64) ** 2).sum(axis=2)
    ids, counts = np.unique(task.instance_ids, return_counts=True)
    for iid in ids[counts > 1]:
        report.add(
            "DuplicateInstanceId",
            task.task_id,
            int(iid),
            "instance_id repeated within task",
        )
    if (task.instance_ids < 0).any():
        bad = int(task.instance_ids[task.instance_ids < 0][0])
        report.add("NegativeInstanceId", task.task_id, bad, "instance_id must be >= 0")
    for row in np.flatnonzero(~finite.all(axis=1)):
        which = ROW_NAMES[int(np.flatnonzero(~finite[row])[0])]
        report.add(
            "NonFiniteValue",
            task.task_id,
            int(task.instance_ids[row]),
            f"non-finite coordinate in {which} vector",
        )
    zero = (norms_sq == 0.0) & finite
    for row in np.flatnonzero(zero.any(axis=1)):
        which = ROW_NAMES[int(np.flatnonzero(zero[row])[0])]
        report.add(
            "ZeroVector",
            task.task_id,
            int(task.instance_ids[row]),
            f"all-zero {which} vector",
        )


def validate_corpus(corpus: Corpus) -> ValidationReport:
    """Enumerate every invariant violation; an empty report means valid."""
    report = ValidationReport()
    if corpus.num_tasks == 0:
        report.add("EmptyCorpus", message="corpus has no tasks")
        return report
    if corpus.dimension < 1:
        report.add("BadDimension", message=f"dimension {corpus.dimension} < 1")
    seen: set[int] = set()
    for task in corpus.tasks:
        if task.task_id in seen:
            report.add("DuplicateTaskId", task.task_id, message="task_id repeated")
        seen.add(task.task_id)
        if task.task_id < 0:
            report.add("NegativeTaskId", task.task_id, message="task_id must be >= 0")
        _check_task_vectors(task, corpus.dimension, report)
    return report


def _raise_first(report: ValidationReport):
    errors = {
        "DuplicateTaskId": DuplicateTaskId,
        "DimensionMismatch": DimensionMismatch,
        "NonFiniteValue": NonFiniteValue,
        "ZeroVector": ZeroVector,
    }
    for v in report.violations:
        exc = errors.get(v.kind, ManifestError)
        raise exc(
            f"{v.kind}: task_id={v.task_id} instance_id={v.instance_id} {v.message}"
        )


def load_corpus(manifest_path, strict: bool = True) -> Corpus:
    """Load and fully validate a corpus from its manifest.

    Order-preserving: task order follows the manifest, instance order
    follows each binary file. With strict=False, data-level invariant
    violations do not raise; callers then run validate_corpus themselves.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise MissingFile(f"manifest not found: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ManifestError(f"cannot parse manifest {manifest_path}: {exc}") from exc
    try:
        dimension = int(manifest["dimension"])
        task_entries = manifest["tasks"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"manifest missing required keys: {exc}") from exc
    if dimension < 1:
        raise ManifestError(f"declared dimension must be >= 1, got {dimension}")
    if not task_entries:
        raise ManifestError("manifest declares no tasks")

    tasks = []
    base = manifest_path.parent
    for entry in task_entries:
        try:
            task_id = int(entry["task_id"])
            name = str(entry["name"])
            ins = entry.get("instructions", {})
            instructions = Instructions(
                query=str(ins.get("query", "")),
                positive=str(ins.get("positive", "")),
                negative=str(ins.get("negative", "")),
            )
            rel = entry["file"]
            count = int(entry["count"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"bad task entry in manifest: {exc}") from exc
        path = base / rel
        if not path.is_file():
            raise MissingFile(f"task {task_id}: embedding file not found: {path}")
        raw = np.fromfile(path, dtype="<f4")
        expected = count * 3 * dimension
        if raw.size != expected:
            raise DimensionMismatch(
                f"task {task_id}: file {path} holds {raw.size} floats, "
                f"expected {count}x3x{dimension}={expected}"
            )
        emb = raw.reshape(count, 3, dimension)
        tasks.append(TaskDataset(task_id, name, instructions, emb))

    corpus = Corpus(dimension=dimension, tasks=tuple(tasks))
    if strict:
        report = validate_corpus(corpus)
        if not report.valid:
            _raise_first(report)
    return corpus


def save_corpus(corpus: Corpus, manifest_path) -> None:
    """Write a corpus in the manifest + flat-binary format (exact round-trip)."""
    manifest_path = Path(manifest_path)
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    entries = []
    for task in corpus.tasks:
        fname = f"task_{task.task_id}.f32"
        data = np.ascontiguousarray(task.embeddings, dtype="<f4")
        data.tofile(manifest_path.parent / fname)
        entries.append(
            {
                "task_id": task.task_id,
                "name": task.name,
                "instructions": {
                    "query": task.instructions.query,
                    "positive": task.instructions.positive,
                    "negative": task.instructions.negative,
                },
                "file": fname,
                "count": len(task),
            }
        )
    manifest = {"dimension": corpus.dimension, "tasks": entries}
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def manifest_sha256(manifest_path) -> str:
    """Hex digest of the manifest file bytes, recorded in schedule provenance."""
    return hashlib.sha256(Path(manifest_path).read_bytes()).hexdigest()

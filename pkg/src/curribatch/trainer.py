"""Desk-scale validation of the training-side math: masked contrastive
loss over same-task mini-batches, analytic gradients for a linear
encoder, and a schedule-consuming training loop on synthetic data.

The per-instance loss is the standard InfoNCE term
``-log softmax(sim(q_j, s+_j)/tau)`` where the candidate pool is the
batch's n positives plus its n negatives (2n candidates). A masked
instance contributes no loss term, but its sentences stay in every other
instance's candidate pool. The batch loss is the mean over unmasked
instances (0 when everything is masked).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus, Instructions, TaskDataset
from .errors import (
    DimensionMismatch,
    EmptyBatch,
    NonPositiveTemperature,
    ScheduleCorpusMismatch,
)
from .schedule import BatchSchedule, verify_schedule


@dataclass(frozen=True)
class ContrastiveConfig:
    temperature: float = 0.01
    learning_rate: float = 1e-2
    steps: int | None = None  # cap on update steps; None = consume the whole schedule
    epochs: int = 1
    seed: int = 0


@dataclass
class LinearEncoder:
    """Row-major weight matrix mapping raw D_in vectors to D_out space."""

    weights: np.ndarray

    @classmethod
    def identity(cls, dim: int) -> "LinearEncoder":
        return cls(weights=np.eye(dim, dtype=np.float64))

    @classmethod
    def random(cls, d_out: int, d_in: int, seed: int = 0, scale: float = 0.1) -> "LinearEncoder":
        rng = np.random.default_rng(seed)
        return cls(weights=scale * rng.standard_normal((d_out, d_in)))

    def encode(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) @ self.weights.T

    def save(self, manifest_path) -> None:
        """Checkpoint: JSON manifest + float32 little-endian weight file."""
        manifest_path = Path(manifest_path)
        manifest_path.parent.mkdir(parents=True, exist_ok=True)
        fname = manifest_path.stem + ".f32"
        np.ascontiguousarray(self.weights, dtype="<f4").tofile(manifest_path.parent / fname)
        manifest_path.write_text(
            json.dumps(
                {"rows": int(self.weights.shape[0]), "cols": int(self.weights.shape[1]), "file": fname},
                indent=2,
            )
            + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, manifest_path) -> "LinearEncoder":
        manifest_path = Path(manifest_path)
        meta = json.loads(manifest_path.read_text(encoding="utf-8"))
        raw = np.fromfile(manifest_path.parent / meta["file"], dtype="<f4")
        return cls(weights=raw.reshape(meta["rows"], meta["cols"]).astype(np.float64))


def _check_batch(q, p, n, masks, temperature):
    if temperature <= 0:
        raise NonPositiveTemperature(f"temperature must be > 0, got {temperature}")
    if q.shape[0] == 0:
        raise EmptyBatch("batch must hold at least one instance")
    if not (q.shape == p.shape == n.shape) or masks.shape[0] != q.shape[0]:
        raise DimensionMismatch(
            f"inconsistent batch shapes: q{q.shape} p{p.shape} n{n.shape} masks{masks.shape}"
        )


def _normalize_rows(x):
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return x / norms, norms


def _logits(q, p, n, temperature):
    qn, _ = _normalize_rows(q)
    c = np.vstack([p, n])
    cn, _ = _normalize_rows(c)
    return (qn @ cn.T) / temperature


def batch_loss(encoded_queries, encoded_positives, encoded_negatives, masks, temperature) -> float:
    """Masked InfoNCE over one same-task mini-batch of encoded vectors."""
    q = np.asarray(encoded_queries, dtype=np.float64)
    p = np.asarray(encoded_positives, dtype=np.float64)
    n = np.asarray(encoded_negatives, dtype=np.float64)
    masks = np.asarray(masks, dtype=np.float64)
    _check_batch(q, p, n, masks, temperature)
    m_count = masks.sum()
    if m_count == 0:
        return 0.0
    logits = _logits(q, p, n, temperature)
    shift = logits.max(axis=1, keepdims=True)
    lse = (shift + np.log(np.exp(logits - shift).sum(axis=1, keepdims=True)))[:, 0]
    b = q.shape[0]
    per_instance = lse - logits[np.arange(b), np.arange(b)]
    return float((masks * per_instance).sum() / m_count)


def batch_gradient(encoder: LinearEncoder, raw_queries, raw_positives, raw_negatives, masks, temperature) -> np.ndarray:
    """Analytic d(batch_loss)/d(encoder.weights) for raw-input triples."""
    _, grad = _loss_and_gradient(encoder, raw_queries, raw_positives, raw_negatives, masks, temperature)
    return grad


def _loss_and_gradient(encoder, raw_queries, raw_positives, raw_negatives, masks, temperature):
    xq = np.asarray(raw_queries, dtype=np.float64)
    xp = np.asarray(raw_positives, dtype=np.float64)
    xn = np.asarray(raw_negatives, dtype=np.float64)
    masks = np.asarray(masks, dtype=np.float64)
    w = encoder.weights
    q = xq @ w.T
    p = xp @ w.T
    n = xn @ w.T
    _check_batch(q, p, n, masks, temperature)
    m_count = masks.sum()
    if m_count == 0:
        return 0.0, np.zeros_like(w)

    b = q.shape[0]
    qn, q_norm = _normalize_rows(q)
    xc = np.vstack([xp, xn])
    c = np.vstack([p, n])
    cn, c_norm = _normalize_rows(c)
    logits = (qn @ cn.T) / temperature
    shift = logits.max(axis=1, keepdims=True)
    expl = np.exp(logits - shift)
    soft = expl / expl.sum(axis=1, keepdims=True)
    lse = (shift + np.log(expl.sum(axis=1, keepdims=True)))[:, 0]
    idx = np.arange(b)
    loss = float((masks * (lse - logits[idx, idx])).sum() / m_count)

    # d loss / d cosine-similarity matrix
    d_logits = soft.copy()
    d_logits[idx, idx] -= 1.0
    d_sim = d_logits * (masks[:, None] / (m_count * temperature))

    d_qn = d_sim @ cn
    d_cn = d_sim.T @ qn
    # back through row normalization y = x / |x|
    d_q = (d_qn - (d_qn * qn).sum(axis=1, keepdims=True) * qn) / q_norm
    d_c = (d_cn - (d_cn * cn).sum(axis=1, keepdims=True) * cn) / c_norm
    grad = d_q.T @ xq + d_c.T @ xc
    return loss, grad


@dataclass(frozen=True)
class TraceRow:
    step: int
    task_id: int
    loss: float
    unmasked_count: int


def write_trace_csv(trace, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "task_id", "loss", "unmasked_count"])
        for row in trace:
            writer.writerow([row.step, row.task_id, repr(row.loss), row.unmasked_count])


def train(
    corpus: Corpus,
    schedule: BatchSchedule,
    config: ContrastiveConfig = ContrastiveConfig(),
    encoder: LinearEncoder | None = None,
):
    """Plain gradient descent over the schedule, strictly in batch order.

    Returns (trained encoder, per-step loss trace). Deterministic given
    the config seed and inputs.
    """
    report = verify_schedule(schedule, corpus)
    if not report.valid:
        first = report.violations[0]
        raise ScheduleCorpusMismatch(f"schedule fails verification: {first.as_dict()}")
    if encoder is None:
        encoder = LinearEncoder.identity(corpus.dimension)
    w = encoder.weights.astype(np.float64).copy()
    tasks = {t.task_id: t for t in corpus.tasks}
    row_index: dict[int, dict[int, int]] = {
        tid: {int(i): r for r, i in enumerate(t.instance_ids)} for tid, t in tasks.items()
    }

    trace: list[TraceRow] = []
    step = 0
    for _ in range(config.epochs):
        for batch in schedule.batches:
            if config.steps is not None and step >= config.steps:
                break
            task = tasks[batch.task_id]
            rows = [row_index[batch.task_id][i] for i in batch.instance_ids]
            emb = task.embeddings[rows].astype(np.float64)
            masks = np.asarray(batch.masks, dtype=np.float64)
            enc = LinearEncoder(weights=w)
            loss, grad = _loss_and_gradient(
                enc, emb[:, 0, :], emb[:, 1, :], emb[:, 2, :], masks, config.temperature
            )
            w = w - config.learning_rate * grad
            trace.append(
                TraceRow(step=step, task_id=batch.task_id, loss=loss, unmasked_count=int(masks.sum()))
            )
            step += 1
        else:
            continue
        break
    return LinearEncoder(weights=w), trace


def encoded_margins(corpus: Corpus, encoder: LinearEncoder) -> dict[int, np.ndarray]:
    """Per-task margins recomputed in the encoder's output space."""
    out: dict[int, np.ndarray] = {}
    for task in corpus.tasks:
        emb = task.embeddings.astype(np.float64)
        q = encoder.encode(emb[:, 0, :])
        p = encoder.encode(emb[:, 1, :])
        n = encoder.encode(emb[:, 2, :])
        nq = np.linalg.norm(q, axis=1)
        npos = np.linalg.norm(p, axis=1)
        nneg = np.linalg.norm(n, axis=1)
        sim_pos = np.einsum("ij,ij->i", q, p) / (nq * npos)
        sim_neg = np.einsum("ij,ij->i", q, n) / (nq * nneg)
        out[task.task_id] = sim_pos - sim_neg
    return out


def make_synthetic_corpus(
    num_tasks: int,
    instances_per_task: int,
    dimension: int,
    cluster_spread: float = 0.1,
    noise_fraction: float = 0.0,
    seed: int = 0,
) -> Corpus:
    """Clustered synthetic corpus: one unit-norm Gaussian mean per task,
    positives perturbed from their query, negatives drawn from another
    cluster. A `noise_fraction` of instances (exact rounded count) gets
    positive and negative swapped, mimicking label noise."""
    if num_tasks < 1 or instances_per_task < 1 or dimension < 1:
        raise ValueError("num_tasks, instances_per_task and dimension must all be >= 1")
    rng = np.random.default_rng(seed)
    means = rng.standard_normal((num_tasks, dimension))
    means /= np.linalg.norm(means, axis=1, keepdims=True)

    def unit(x):
        return x / np.linalg.norm(x, axis=1, keepdims=True)

    n = instances_per_task
    tasks = []
    for t in range(num_tasks):
        queries = unit(means[t] + cluster_spread * rng.standard_normal((n, dimension)))
        positives = unit(queries + cluster_spread * rng.standard_normal((n, dimension)))
        if num_tasks > 1:
            others = (t + 1 + rng.integers(0, num_tasks - 1, size=n)) % num_tasks
            negatives = unit(means[others] + cluster_spread * rng.standard_normal((n, dimension)))
        else:
            negatives = unit(-means[t] + cluster_spread * rng.standard_normal((n, dimension)))
        swaps = int(round(noise_fraction * n))
        if swaps:
            rows = rng.choice(n, size=swaps, replace=False)
            positives[rows], negatives[rows] = negatives[rows].copy(), positives[rows].copy()
        emb = np.stack([queries, positives, negatives], axis=1).astype(np.float32)
        tasks.append(TaskDataset(t, f"synthetic-{t}", Instructions(), emb))
    return Corpus(dimension=dimension, tasks=tuple(tasks))

"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with -s to see them)."""

import json
import math
import time

import numpy as np

import curribatch as cb
from curribatch.annealing import AnnealConfig, acceptance_probability, anneal, brute_force_order
from curribatch.cli import main
from curribatch.corpus import Corpus, save_corpus
from curribatch.reports import MILD, MODERATE, SEVERE, underfitting_report
from curribatch.schedule import build_schedule, verify_schedule
from curribatch.similarity import SimilarityMatrix
from curribatch.trainer import (
    ContrastiveConfig,
    LinearEncoder,
    batch_loss,
    encoded_margins,
    make_synthetic_corpus,
    train,
)

from conftest import random_task
from test_trainer import finite_difference_gradient, naive_batch_loss


def _report(name, ok, detail=""):
    print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    assert ok, f"{name}: {detail}"


def random_matrix(m, seed):
    rng = np.random.default_rng(seed)
    entries = rng.uniform(-1, 1, size=(m, m))
    entries = (entries + entries.T) / 2
    np.fill_diagonal(entries, 1.0)
    return SimilarityMatrix(entries=entries, task_ids=tuple(range(m)))


SA_CONFIG = dict(initial_temperature=1.0, cooling_rate=0.995, max_iterations=200_000)


def test_criterion_1_sa_matches_exhaustive_oracle():
    # warm the JIT outside the timed region
    anneal(random_matrix(5, 0), AnnealConfig(max_iterations=10))
    start = time.perf_counter()
    hits = {}
    for m in (5, 6, 7, 8):
        hit = 0
        for trial in range(100):
            matrix = random_matrix(m, 1000 * m + trial)
            sa = anneal(matrix, AnnealConfig(seed=trial, **SA_CONFIG))
            exact = brute_force_order(matrix)
            assert sa.score <= exact.score + 1e-9
            if abs(sa.score - exact.score) <= 1e-9:
                hit += 1
        hits[m] = hit
    elapsed = time.perf_counter() - start
    ok = all(h >= 95 for h in hits.values()) and elapsed < 60
    _report("criterion 1 (SA vs oracle optimality)", ok, f"hits={hits}, {elapsed:.1f}s")


def test_criterion_2_order_beats_random():
    wins = 0
    for rep in range(100):
        matrix = random_matrix(8, 5000 + rep)
        sa = anneal(matrix, AnnealConfig(seed=rep, **SA_CONFIG))
        rng = np.random.default_rng(rep)
        best_random = max(
            cb.tour_score(rng.permutation(8), matrix) for _ in range(100)
        )
        if sa.score >= best_random - 1e-12:
            wins += 1
    _report("criterion 2 (order quality vs random)", wins >= 99, f"wins={wins}/100")


def test_criterion_3_metropolis_statistics():
    rng = np.random.default_rng(2024)
    p = acceptance_probability(-0.5, 1.0)
    freq = float((rng.random(100_000) < p).mean())
    err = abs(freq - math.exp(-0.5))
    _report("criterion 3 (Metropolis statistics)", err < 0.01, f"freq={freq:.4f}, err={err:.4f}")


def test_criterion_4_schedule_invariants_fuzz():
    start = time.perf_counter()
    rng = np.random.default_rng(99)
    violations = 0
    for case in range(200):
        if case == 0:
            sizes = [200] * 50  # task-count bound
        elif case == 1:
            sizes = [5000, 17, 3]  # instance-count bound
        else:
            sizes = [int(rng.integers(1, 121)) for _ in range(int(rng.integers(1, 51)))]
        dim = int(rng.integers(2, 9))
        tasks = tuple(random_task(i, n, dim, rng) for i, n in enumerate(sizes))
        corpus = Corpus(dimension=dim, tasks=tasks)
        order = list(rng.permutation(corpus.task_ids))
        batch_size = int(rng.integers(1, 129))
        records = {t.task_id: cb.sort_task_instances(t) for t in tasks}
        schedule = build_schedule(corpus, order, records, batch_size)
        report = verify_schedule(schedule, corpus)
        violations += len(report.violations)
    elapsed = time.perf_counter() - start
    ok = violations == 0 and elapsed < 30
    _report(
        "criterion 4 (schedule invariants fuzz)",
        ok,
        f"violations={violations} over 200 corpora, {elapsed:.1f}s",
    )


def test_criterion_5_pipeline_determinism(tmp_path):
    corpus = make_synthetic_corpus(6, 40, 8, cluster_spread=0.4, noise_fraction=0.1, seed=12)
    save_corpus(corpus, tmp_path / "corpus" / "manifest.json")
    flags = ["--iters", "200000", "--seed", "17", "--batch-size", "16"]
    for out in ("a", "b"):
        rc = main(
            ["pipeline", str(tmp_path / "corpus" / "manifest.json"),
             "--out", str(tmp_path / out), *flags]
        )
        assert rc == 0
    files = ["order.json", "schedule.jsonl", "difficulty.jsonl", "similarity.json",
             "underfitting.json", "histogram.json", "order_quality.json"]
    same = [
        f for f in files
        if (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    ]
    _report(
        "criterion 5 (pipeline determinism)",
        len(same) == len(files),
        f"{len(same)}/{len(files)} artifacts byte-identical",
    )


def test_criterion_6_gradient_correctness():
    worst = 0.0
    for trial in range(50):
        rng = np.random.default_rng(3000 + trial)
        d_in = int(rng.integers(3, 7))
        d_out = int(rng.integers(2, 5))
        b = int(rng.integers(2, 6))
        enc = LinearEncoder.random(d_out, d_in, seed=trial, scale=0.5)
        q, p, n = (rng.standard_normal((b, d_in)) for _ in range(3))
        masks = rng.integers(0, 2, size=b)
        tau = float(rng.uniform(0.05, 1.0))
        analytic = cb.batch_gradient(enc, q, p, n, masks, tau)
        numeric = finite_difference_gradient(enc, q, p, n, masks, tau, h=1e-5)
        scale = np.maximum(np.abs(numeric), 1e-8)
        rel = float((np.abs(analytic - numeric) / scale).max())
        if masks.sum() == 0:
            rel = float(np.abs(analytic).max())  # both sides must vanish
        worst = max(worst, rel)
    _report("criterion 6 (gradient correctness)", worst < 1e-4, f"max rel err={worst:.2e}")


def test_criterion_7_loss_oracle_equivalence():
    worst = 0.0
    for trial in range(100):
        rng = np.random.default_rng(4000 + trial)
        b = int(rng.integers(1, 9))
        d = int(rng.integers(2, 8))
        q, p, n = (rng.standard_normal((b, d)) for _ in range(3))
        masks = rng.integers(0, 2, size=b)
        tau = float(rng.uniform(0.05, 2.0))
        got = batch_loss(q, p, n, masks, tau)
        want = naive_batch_loss(q, p, n, masks, tau)
        worst = max(worst, abs(got - want))
    _report("criterion 7 (loss oracle equivalence)", worst < 1e-10, f"max abs err={worst:.2e}")


def test_criterion_8_underfitting_diagnostic_fidelity():
    rng = np.random.default_rng(8)
    corpus = Corpus(dimension=3, tasks=tuple(random_task(i, 10, 3, rng) for i in range(3)))
    margins = {
        0: np.array([0.0] * 9 + [1.0]),                    # 9/10 below -> severe
        1: np.array([0.0] * 6 + [0.05, 0.5, 0.6, 0.7]),    # 6/10 below; 0.05 NOT counted
        2: np.array([0.04, 0.049] + [0.9] * 8),            # 2/10 -> mild
    }
    report = underfitting_report(corpus, margins, threshold=0.05)
    got = [(t.underfit_count, round(t.ratio, 6), t.severity) for t in report.per_task]
    want = [(9, 0.9, SEVERE), (6, 0.6, MODERATE), (2, 0.2, MILD)]
    _report("criterion 8 (underfitting diagnostic fidelity)", got == want, f"got={got}")


def test_criterion_9_desk_scale_curriculum_experiment(tmp_path):
    corpus = make_synthetic_corpus(
        8, 512, 32, cluster_spread=0.9, noise_fraction=0.1, seed=20
    )
    reps = [cb.task_representation(t, 256, seed=i) for i, t in enumerate(corpus.tasks)]
    matrix = cb.similarity_matrix(reps)
    order = anneal(matrix, AnnealConfig(seed=7, **SA_CONFIG))
    records = {t.task_id: cb.sort_task_instances(t) for t in corpus.tasks}
    task_order = [matrix.task_ids[i] for i in order.order]
    schedule = build_schedule(corpus, task_order, records, 64)
    assert verify_schedule(schedule, corpus).valid

    config = ContrastiveConfig(temperature=0.05, learning_rate=0.5, epochs=20, seed=0)
    pre = encoded_margins(corpus, LinearEncoder.identity(32))
    encoder, trace = train(corpus, schedule, config)
    post = encoded_margins(corpus, encoder)

    losses = [r.loss for r in trace]
    decile = max(1, len(losses) // 10)
    first, last = float(np.mean(losses[:decile])), float(np.mean(losses[-decile:]))
    loss_ok = last < first

    pre_ratio = {k: float((v < 0.05).mean()) for k, v in pre.items()}
    post_ratio = {k: float((v < 0.05).mean()) for k, v in post.items()}
    improved = sum(post_ratio[k] < pre_ratio[k] for k in pre_ratio)

    # random-vs-curriculum comparison: emitted as a report, not a gate
    rng = np.random.default_rng(1)
    shuffled = {
        t.task_id: [records[t.task_id][i] for i in rng.permutation(len(records[t.task_id]))]
        for t in corpus.tasks
    }
    random_schedule = build_schedule(
        corpus, list(rng.permutation(corpus.task_ids)), shuffled, 64
    )
    # random within-task order breaks margin monotonicity on purpose; train
    # with the same update rule but without schedule verification
    from curribatch.trainer import _loss_and_gradient

    w = LinearEncoder.identity(32).weights.copy()
    tasks = {t.task_id: t for t in corpus.tasks}
    for _ in range(config.epochs):
        for batch in random_schedule.batches:
            task = tasks[batch.task_id]
            rows = [task.row_of(i) for i in batch.instance_ids]
            emb = task.embeddings[rows].astype(np.float64)
            _, grad = _loss_and_gradient(
                LinearEncoder(w), emb[:, 0, :], emb[:, 1, :], emb[:, 2, :],
                np.asarray(batch.masks, float), config.temperature,
            )
            w = w - config.learning_rate * grad
    rand_post = encoded_margins(corpus, LinearEncoder(w))
    rand_ratio = {k: float((v < 0.05).mean()) for k, v in rand_post.items()}
    comparison = {
        "curriculum_final_underfit_mean": float(np.mean(list(post_ratio.values()))),
        "random_final_underfit_mean": float(np.mean(list(rand_ratio.values()))),
    }
    (tmp_path / "curriculum_vs_random.json").write_text(json.dumps(comparison, indent=2))

    ok = loss_ok and improved >= 6
    _report(
        "criterion 9 (desk-scale curriculum experiment)",
        ok,
        f"loss {first:.3f}->{last:.3f}, underfit improved on {improved}/8 tasks, "
        f"comparison={comparison}",
    )

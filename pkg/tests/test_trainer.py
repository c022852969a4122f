import math

import mpmath
import numpy as np
import pytest

from curribatch.difficulty import sort_task_instances, task_margins
from curribatch.errors import EmptyBatch, NonPositiveTemperature, ScheduleCorpusMismatch
from curribatch.schedule import BatchSchedule, MiniBatch, build_schedule
from curribatch.similarity import cosine_similarity
from curribatch.trainer import (
    ContrastiveConfig,
    LinearEncoder,
    batch_gradient,
    batch_loss,
    make_synthetic_corpus,
    train,
    write_trace_csv,
)


def naive_batch_loss(q, p, n, masks, tau):
    """Straightforward reimplementation: explicit per-instance softmax over
    an explicitly rebuilt candidate pool (all positives then all negatives)."""
    q, p, n = np.asarray(q, float), np.asarray(p, float), np.asarray(n, float)
    candidates = [p[k] for k in range(len(p))] + [n[k] for k in range(len(n))]
    total, count = 0.0, 0
    for j in range(len(q)):
        if masks[j] == 0:
            continue
        exps = [math.exp(cosine_similarity(q[j], c) / tau) for c in candidates]
        prob = math.exp(cosine_similarity(q[j], p[j]) / tau) / sum(exps)
        total += -math.log(prob)
        count += 1
    return total / count if count else 0.0


def test_loss_hand_value():
    # one instance, orthogonal negative: -log(e / (e + 1))
    expected = float(mpmath.log(1 + mpmath.e ** -1))
    got = batch_loss([[1, 0]], [[1, 0]], [[0, 1]], [1], 1.0)
    assert got == pytest.approx(expected, abs=1e-12)


def test_loss_all_masked_zero():
    rng = np.random.default_rng(0)
    q, p, n = (rng.standard_normal((4, 3)) for _ in range(3))
    assert batch_loss(q, p, n, [0, 0, 0, 0], 0.1) == 0.0


def test_loss_matches_naive_oracle():
    rng = np.random.default_rng(1)
    for trial in range(20):
        b = int(rng.integers(1, 7))
        q, p, n = (rng.standard_normal((b, 5)) for _ in range(3))
        masks = rng.integers(0, 2, size=b)
        if masks.sum() == 0:
            masks[0] = 1
        tau = float(rng.uniform(0.05, 2.0))
        assert batch_loss(q, p, n, masks, tau) == pytest.approx(
            naive_batch_loss(q, p, n, masks, tau), abs=1e-10
        )


def test_loss_positive_when_any_unmasked():
    rng = np.random.default_rng(2)
    q, p, n = (rng.standard_normal((3, 4)) for _ in range(3))
    assert batch_loss(q, p, n, [1, 0, 1], 0.5) > 0.0


def test_loss_invariant_under_instance_permutation():
    rng = np.random.default_rng(3)
    q, p, n = (rng.standard_normal((5, 4)) for _ in range(3))
    masks = np.array([1, 1, 0, 1, 1])
    perm = np.array([3, 0, 4, 1, 2])
    a = batch_loss(q, p, n, masks, 0.2)
    b = batch_loss(q[perm], p[perm], n[perm], masks[perm], 0.2)
    assert a == pytest.approx(b, abs=1e-12)


def test_masked_instance_stays_in_candidate_pool():
    rng = np.random.default_rng(4)
    q, p, n = (rng.standard_normal((3, 4)) for _ in range(3))
    with_masked = batch_loss(q, p, n, [1, 0, 1], 0.2)
    # dropping instance 1 entirely removes its sentences from the pool,
    # which must change the loss; masking must not
    dropped = batch_loss(q[[0, 2]], p[[0, 2]], n[[0, 2]], [1, 1], 0.2)
    assert with_masked != pytest.approx(dropped, abs=1e-12)
    assert with_masked == pytest.approx(
        naive_batch_loss(q, p, n, [1, 0, 1], 0.2), abs=1e-10
    )


def test_loss_errors():
    with pytest.raises(EmptyBatch):
        batch_loss(np.empty((0, 2)), np.empty((0, 2)), np.empty((0, 2)), [], 1.0)
    with pytest.raises(NonPositiveTemperature):
        batch_loss([[1, 0]], [[1, 0]], [[0, 1]], [1], 0.0)


def finite_difference_gradient(enc, q, p, n, masks, tau, h=1e-5):
    from curribatch.trainer import _loss_and_gradient

    grad = np.zeros_like(enc.weights)
    for i in range(grad.shape[0]):
        for j in range(grad.shape[1]):
            wp = enc.weights.copy()
            wp[i, j] += h
            wm = enc.weights.copy()
            wm[i, j] -= h
            lp, _ = _loss_and_gradient(LinearEncoder(wp), q, p, n, masks, tau)
            lm, _ = _loss_and_gradient(LinearEncoder(wm), q, p, n, masks, tau)
            grad[i, j] = (lp - lm) / (2 * h)
    return grad


def test_gradient_zero_when_all_masked():
    rng = np.random.default_rng(5)
    enc = LinearEncoder.random(3, 4, seed=0)
    q, p, n = (rng.standard_normal((3, 4)) for _ in range(3))
    grad = batch_gradient(enc, q, p, n, [0, 0, 0], 0.1)
    assert np.array_equal(grad, np.zeros((3, 4)))


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(6)
    enc = LinearEncoder.random(3, 5, seed=1)
    q, p, n = (rng.standard_normal((3, 5)) for _ in range(3))
    masks = np.array([1, 0, 1])
    analytic = batch_gradient(enc, q, p, n, masks, 0.1)
    numeric = finite_difference_gradient(enc, q, p, n, masks, 0.1)
    denom = np.maximum(np.abs(numeric), 1e-8)
    assert (np.abs(analytic - numeric) / denom).max() < 1e-4


def test_gradient_deterministic():
    rng = np.random.default_rng(7)
    enc = LinearEncoder.random(2, 3, seed=2)
    q, p, n = (rng.standard_normal((2, 3)) for _ in range(3))
    a = batch_gradient(enc, q, p, n, [1, 1], 0.2)
    b = batch_gradient(enc, q, p, n, [1, 1], 0.2)
    assert np.array_equal(a, b)
    assert np.isfinite(a).all()


def curriculum_schedule(corpus, batch_size):
    records = {t.task_id: sort_task_instances(t) for t in corpus.tasks}
    return build_schedule(corpus, list(corpus.task_ids), records, batch_size)


def test_train_zero_steps_unchanged():
    corpus = make_synthetic_corpus(2, 8, 4, seed=0)
    schedule = curriculum_schedule(corpus, 4)
    encoder, trace = train(corpus, schedule, ContrastiveConfig(steps=0))
    assert trace == []
    assert np.array_equal(encoder.weights, np.eye(4))


def test_train_loss_decreases_on_separable_corpus():
    corpus = make_synthetic_corpus(2, 100, 8, cluster_spread=0.6, seed=1)
    schedule = curriculum_schedule(corpus, 10)
    config = ContrastiveConfig(temperature=0.05, learning_rate=0.05, epochs=10, seed=0)
    _, trace = train(corpus, schedule, config)
    assert len(trace) == len(schedule.batches) * 10
    losses = [r.loss for r in trace]
    decile = max(1, len(losses) // 10)
    assert np.mean(losses[-decile:]) < np.mean(losses[:decile])


def test_train_deterministic():
    corpus = make_synthetic_corpus(2, 16, 4, seed=2)
    schedule = curriculum_schedule(corpus, 4)
    config = ContrastiveConfig(temperature=0.1, epochs=2)
    enc_a, trace_a = train(corpus, schedule, config)
    enc_b, trace_b = train(corpus, schedule, config)
    assert np.array_equal(enc_a.weights, enc_b.weights)
    assert trace_a == trace_b


def test_train_rejects_mismatched_schedule():
    corpus = make_synthetic_corpus(2, 8, 4, seed=3)
    other = make_synthetic_corpus(3, 6, 4, seed=4)
    schedule = curriculum_schedule(other, 4)
    with pytest.raises(ScheduleCorpusMismatch):
        train(corpus, schedule, ContrastiveConfig())


def test_trace_csv(tmp_path):
    corpus = make_synthetic_corpus(2, 8, 4, seed=5)
    schedule = curriculum_schedule(corpus, 4)
    _, trace = train(corpus, schedule, ContrastiveConfig(temperature=0.1))
    path = tmp_path / "trace.csv"
    write_trace_csv(trace, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "step,task_id,loss,unmasked_count"
    assert len(lines) == len(trace) + 1


def test_encoder_checkpoint_round_trip(tmp_path):
    enc = LinearEncoder.random(3, 5, seed=9)
    enc.weights = enc.weights.astype(np.float32).astype(np.float64)
    enc.save(tmp_path / "encoder.json")
    back = LinearEncoder.load(tmp_path / "encoder.json")
    assert np.array_equal(back.weights, enc.weights)


def test_synthetic_no_noise_mostly_positive_margins():
    corpus = make_synthetic_corpus(3, 200, 16, cluster_spread=0.1, seed=6)
    for task in corpus.tasks:
        margins = task_margins(task)
        assert (margins > 0).mean() >= 0.99


def test_synthetic_noise_count_exact():
    corpus = make_synthetic_corpus(2, 1000, 8, cluster_spread=0.1, noise_fraction=0.2, seed=7)
    for task in corpus.tasks:
        margins = task_margins(task)
        # swapped instances flip the sign of a cleanly positive margin
        assert int((margins < 0).sum()) == 200


def test_synthetic_task_similarity_tracks_cluster_means():
    corpus = make_synthetic_corpus(2, 400, 12, cluster_spread=0.05, seed=8)
    from curribatch.similarity import task_representation

    reps = [task_representation(t, 400, seed=0) for t in corpus.tasks]
    got = cosine_similarity(reps[0].vector, reps[1].vector)
    mean0 = np.asarray(corpus.tasks[0].queries, float).mean(axis=0)
    mean1 = np.asarray(corpus.tasks[1].queries, float).mean(axis=0)
    assert got == pytest.approx(cosine_similarity(mean0, mean1), abs=1e-9)


def test_synthetic_deterministic():
    a = make_synthetic_corpus(2, 10, 4, seed=9)
    b = make_synthetic_corpus(2, 10, 4, seed=9)
    for ta, tb in zip(a.tasks, b.tasks):
        assert np.array_equal(ta.embeddings, tb.embeddings)

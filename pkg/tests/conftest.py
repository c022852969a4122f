import numpy as np
import pytest

from curribatch.corpus import Corpus, Instructions, TaskDataset


def make_task(task_id, embeddings, name=None):
    emb = np.asarray(embeddings, dtype=np.float32)
    return TaskDataset(task_id, name or f"task-{task_id}", Instructions(), emb)


def random_task(task_id, n, dim, rng):
    emb = rng.standard_normal((n, 3, dim)).astype(np.float32)
    return make_task(task_id, emb)


@pytest.fixture
def small_corpus():
    rng = np.random.default_rng(42)
    tasks = (random_task(0, 6, 4, rng), random_task(1, 4, 4, rng))
    return Corpus(dimension=4, tasks=tasks)

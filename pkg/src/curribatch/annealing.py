"""Task-order search: simulated annealing on the closed-tour objective,
plus an exhaustive oracle for small instances.

The objective is the sum of neighboring-task similarities around a closed
tour (including the wrap-around edge), maximized. Each proposal swaps a
random pair of positions; a worsening move with score change delta <= 0
is accepted with probability exp(delta / temperature), and the temperature
decays geometrically every `iterations_per_temperature` steps.

All randomness flows from a single seed through three named child
streams: "init" (starting permutation), "proposal" (swap positions), and
"acceptance" (uniform draws), so runs are reproducible across platforms.
The hot loop is JIT-compiled; the random draws are pre-generated with
numpy so a longer run replays the same prefix of proposals.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
from numba import njit

from .errors import (
    InvalidPermutation,
    NonPositiveTemperature,
    TooFewTasks,
    TooManyTasks,
)
from .similarity import SimilarityMatrix


@dataclass(frozen=True)
class TaskOrder:
    """A permutation of matrix indices 0..m-1 with its tour score."""

    order: tuple[int, ...]
    score: float


@dataclass(frozen=True)
class AnnealConfig:
    initial_temperature: float = 1.0
    cooling_rate: float = 0.995
    max_iterations: int = 2_000_000
    iterations_per_temperature: int | None = None  # default: one sweep = m iterations
    seed: int = 0
    restarts: int = 1
    use_segment_reversal: bool = False  # 2-opt moves instead of pair swaps

    def validate(self) -> None:
        if self.initial_temperature <= 0:
            raise NonPositiveTemperature(
                f"initial_temperature must be > 0, got {self.initial_temperature}"
            )
        if not 0.0 < self.cooling_rate < 1.0:
            raise ValueError(f"cooling_rate must be in (0,1), got {self.cooling_rate}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.iterations_per_temperature is not None and self.iterations_per_temperature < 1:
            raise ValueError("iterations_per_temperature must be >= 1")
        if self.restarts < 1:
            raise ValueError(f"restarts must be >= 1, got {self.restarts}")


def _check_permutation(order, m: int) -> np.ndarray:
    order = np.asarray(order, dtype=np.int64)
    if order.shape != (m,) or not np.array_equal(np.sort(order), np.arange(m)):
        raise InvalidPermutation(f"not a permutation of 0..{m - 1}: {order.tolist()}")
    return order


def tour_score(order, matrix: SimilarityMatrix) -> float:
    """Sum of neighboring similarities along the closed tour through `order`."""
    m = matrix.m
    o = _check_permutation(order, m)
    if m == 1:
        return float(matrix.entries[o[0], o[0]])
    total = 0.0
    for i in range(m):
        total += matrix.entries[o[i], o[(i + 1) % m]]
    return float(total)


def propose_swap(order, rng: np.random.Generator) -> np.ndarray:
    """Copy of `order` with two distinct uniformly-chosen positions exchanged."""
    order = np.asarray(order, dtype=np.int64)
    m = order.shape[0]
    if m < 2:
        raise TooFewTasks("need at least 2 tasks to swap")
    i = int(rng.integers(0, m))
    j = int(rng.integers(0, m - 1))
    if j >= i:
        j += 1
    new = order.copy()
    new[i], new[j] = new[j], new[i]
    return new


def acceptance_probability(delta: float, temperature: float) -> float:
    """Metropolis acceptance for a maximization step with score change `delta`."""
    if temperature <= 0:
        raise NonPositiveTemperature(f"temperature must be > 0, got {temperature}")
    if delta > 0:
        return 1.0
    return math.exp(delta / temperature)


@njit(cache=True)
def _tour(entries, order):
    m = order.shape[0]
    total = 0.0
    for i in range(m):
        total += entries[order[i], order[(i + 1) % m]]
    return total


@njit(cache=True)
def _edges_around(m, i, j, starts):
    # Distinct edge start positions touched by swapping positions i and j.
    cand = ((i - 1) % m, i, (j - 1) % m, j)
    n = 0
    for p in cand:
        dup = False
        for q in range(n):
            if starts[q] == p:
                dup = True
                break
        if not dup:
            starts[n] = p
            n += 1
    return n


@njit(cache=True)
def _sa_swap_loop(entries, order, pa, pb, unif, temps):
    m = order.shape[0]
    cur = _tour(entries, order)
    best = cur
    best_order = order.copy()
    starts = np.empty(4, dtype=np.int64)
    for k in range(pa.shape[0]):
        i = pa[k]
        j = pb[k]
        n_edges = _edges_around(m, i, j, starts)
        old = 0.0
        for e in range(n_edges):
            p = starts[e]
            old += entries[order[p], order[(p + 1) % m]]
        tmp = order[i]
        order[i] = order[j]
        order[j] = tmp
        new = 0.0
        for e in range(n_edges):
            p = starts[e]
            new += entries[order[p], order[(p + 1) % m]]
        delta = new - old
        if delta > 0 or unif[k] < np.exp(delta / temps[k]):
            cur += delta
            if cur > best:
                # re-sum to keep the reported best free of accumulation drift
                cur = _tour(entries, order)
                if cur > best:
                    best = cur
                    best_order[:] = order
        else:
            tmp = order[i]
            order[i] = order[j]
            order[j] = tmp
    return best_order, best


@njit(cache=True)
def _sa_reversal_loop(entries, order, pa, pb, unif, temps):
    m = order.shape[0]
    cur = _tour(entries, order)
    best = cur
    best_order = order.copy()
    for k in range(pa.shape[0]):
        i = pa[k]
        j = pb[k]
        if i > j:
            i, j = j, i
        order[i : j + 1] = order[i : j + 1][::-1]
        new = _tour(entries, order)
        delta = new - cur
        if delta > 0 or unif[k] < np.exp(delta / temps[k]):
            cur = new
            if cur > best:
                best = cur
                best_order[:] = order
        else:
            order[i : j + 1] = order[i : j + 1][::-1]
    return best_order, best


def _run_chain(entries, m, config: AnnealConfig, chain_seed) -> TaskOrder:
    init_ss, prop_ss, acc_ss = chain_seed.spawn(3)
    rng_init = np.random.default_rng(init_ss)
    rng_prop = np.random.default_rng(prop_ss)
    rng_acc = np.random.default_rng(acc_ss)

    order = rng_init.permutation(m).astype(np.int64)
    n = config.max_iterations
    ipt = config.iterations_per_temperature or m
    pa = rng_prop.integers(0, m, size=n)
    pb = rng_prop.integers(0, m - 1, size=n)
    pb = pb + (pb >= pa)
    unif = rng_acc.random(n)
    temps = config.initial_temperature * config.cooling_rate ** (
        np.arange(n, dtype=np.float64) // ipt
    )
    loop = _sa_reversal_loop if config.use_segment_reversal else _sa_swap_loop
    best_order, _ = loop(np.ascontiguousarray(entries), order, pa, pb, unif, temps)
    # recompute the returned score from scratch: the stored score must
    # match tour_score exactly
    best = tuple(int(x) for x in best_order)
    return TaskOrder(order=best, score=float(_tour(entries, best_order)))


def anneal(matrix: SimilarityMatrix, config: AnnealConfig = AnnealConfig()) -> TaskOrder:
    """Best task order seen over the whole run (not merely the final state).

    Deterministic given (matrix, config). With restarts > 1, independent
    chains run from spawned seeds and the best-scoring chain wins (lowest
    chain index on ties).
    """
    config.validate()
    m = matrix.m
    entries = np.asarray(matrix.entries, dtype=np.float64)
    if m == 1:
        return TaskOrder(order=(0,), score=float(entries[0, 0]))
    root = np.random.SeedSequence(config.seed)
    chains = root.spawn(config.restarts)
    best: TaskOrder | None = None
    for chain_seed in chains:
        result = _run_chain(entries, m, config, chain_seed)
        if best is None or result.score > best.score:
            best = result
    return best


def brute_force_order(matrix: SimilarityMatrix) -> TaskOrder:
    """Exact optimum by enumerating all (m-1)!/2 distinct closed tours.

    The first element is fixed at 0 and reflections are skipped; ties go
    to the lexicographically smallest tour for determinism.
    """
    m = matrix.m
    if m > 10:
        raise TooManyTasks(f"exhaustive search capped at m=10, got {m}")
    entries = np.asarray(matrix.entries, dtype=np.float64)
    if m == 1:
        return TaskOrder(order=(0,), score=float(entries[0, 0]))
    if m == 2:
        return TaskOrder(order=(0, 1), score=float(2.0 * entries[0, 1]))
    best_order = None
    best_score = -math.inf
    for rest in itertools.permutations(range(1, m)):
        if rest[0] > rest[-1]:
            continue  # reflection of a tour already visited
        order = (0,) + rest
        score = tour_score(order, matrix)
        if score > best_score + 1e-12:
            best_score = score
            best_order = order
    return TaskOrder(order=best_order, score=best_score)


def write_order(
    path,
    order: TaskOrder,
    matrix: SimilarityMatrix,
    config: AnnealConfig,
    extra_config: dict | None = None,
) -> None:
    """Persist an order as JSON keyed by task ids (stable bytes, no timestamps)."""
    payload = {
        "order": [int(matrix.task_ids[i]) for i in order.order],
        "score": order.score,
        "config": {**asdict(config), **(extra_config or {})},
        "seed": config.seed,
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def read_order(path) -> dict:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    payload["order"] = [int(t) for t in payload["order"]]
    return payload

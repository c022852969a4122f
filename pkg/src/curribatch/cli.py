"""Command-line entry point orchestrating the pipeline and its stages.

Subcommands: validate, order, schedule, analyze, simulate, synth,
pipeline. Every command is deterministic given its flags; all randomness
flows from explicit seeds. Exit codes: 0 success, 1 domain failure
(validation or mismatch), 2 usage error, 3 I/O error.

A JSON config file (flat key/value, keys matching the long flag names
with dashes replaced by underscores) may supply defaults via --config;
explicit flags override it. Environment overrides exist for the output
directory (CURRIBATCH_OUTDIR) and base seed (CURRIBATCH_SEED) only.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .annealing import AnnealConfig, anneal, read_order, write_order
from .corpus import Corpus, load_corpus, manifest_sha256, validate_corpus
from .difficulty import (
    DEFAULT_DELTA,
    MASK_NOISY,
    MASK_POLICIES,
    sort_task_instances,
    task_margins,
    write_difficulty_jsonl,
)
from .errors import CurriculumError, MissingFile, OrderCorpusMismatch
from .reports import margin_histogram, order_quality, underfitting_report
from .annealing import TaskOrder
from .schedule import build_schedule, read_schedule, verify_schedule, write_schedule
from .similarity import (
    DEFAULT_SAMPLE_SIZE,
    SimilarityMatrix,
    similarity_matrix,
    task_representation,
)
from .trainer import (
    ContrastiveConfig,
    LinearEncoder,
    make_synthetic_corpus,
    train,
    write_trace_csv,
)
from .corpus import save_corpus

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2
EXIT_IO = 3

DEFAULTS = {
    "seed": 0,
    "out": ".",
    "nt": DEFAULT_SAMPLE_SIZE,
    "tau0": 1.0,
    "alpha": 0.995,
    "iters": 2_000_000,
    "iters_per_temp": None,
    "restarts": 1,
    "two_opt": False,
    "batch_size": 64,
    "delta": DEFAULT_DELTA,
    "mask_policy": MASK_NOISY,
    "threshold": 0.05,
    "bins": 20,
    "temperature": 0.01,
    "lr": 1e-2,
    "steps": None,
    "epochs": 1,
}

ENV_KEYS = {"out": "CURRIBATCH_OUTDIR", "seed": "CURRIBATCH_SEED"}


def _resolve(args, key, cast=None):
    """Flag > environment (out/seed only) > config file > built-in default."""
    value = getattr(args, key, None)
    if value is None and key in ENV_KEYS and ENV_KEYS[key] in os.environ:
        value = os.environ[ENV_KEYS[key]]
    if value is None:
        value = getattr(args, "_config", {}).get(key)
    if value is None:
        value = DEFAULTS.get(key)
    if value is not None and cast is not None:
        value = cast(value)
    return value


def _task_seed(base_seed: int, task_id: int) -> int:
    # stable per-task stream for representation sampling
    return int(np.random.SeedSequence([base_seed, task_id]).generate_state(1)[0])


def _load(manifest) -> Corpus:
    path = Path(manifest)
    if not path.is_file():
        raise SystemExit2(f"manifest not found: {path}")
    return load_corpus(path)


class SystemExit2(Exception):
    """Usage-class failure (missing manifest and friends) -> exit 2."""


def _build_matrix(corpus: Corpus, nt: int, seed: int) -> SimilarityMatrix:
    reps = [task_representation(t, nt, _task_seed(seed, t.task_id)) for t in corpus.tasks]
    return similarity_matrix(reps)


def cmd_validate(args) -> int:
    path = Path(args.manifest)
    if not path.is_file():
        raise SystemExit2(f"manifest not found: {path}")
    corpus = load_corpus(path, strict=False)
    report = validate_corpus(corpus)
    print(report.to_json())
    return EXIT_OK if report.valid else EXIT_DOMAIN


def cmd_order(args) -> int:
    corpus = _load(args.manifest)
    out = Path(_resolve(args, "out"))
    out.mkdir(parents=True, exist_ok=True)
    seed = _resolve(args, "seed", int)
    nt = _resolve(args, "nt", int)
    config = AnnealConfig(
        initial_temperature=_resolve(args, "tau0", float),
        cooling_rate=_resolve(args, "alpha", float),
        max_iterations=_resolve(args, "iters", int),
        iterations_per_temperature=_resolve(args, "iters_per_temp", int),
        seed=seed,
        restarts=_resolve(args, "restarts", int),
        use_segment_reversal=bool(_resolve(args, "two_opt")),
    )
    matrix = _build_matrix(corpus, nt, seed)
    matrix.to_json(out / "similarity.json")
    result = anneal(matrix, config)
    write_order(
        out / "order.json",
        result,
        matrix,
        config,
        extra_config={"n_t": nt, "representation_seed": seed},
    )
    print(f"order written to {out / 'order.json'} (score {result.score:.6f})")
    return EXIT_OK


def cmd_schedule(args) -> int:
    corpus = _load(args.manifest)
    out = Path(_resolve(args, "out"))
    out.mkdir(parents=True, exist_ok=True)
    order_payload = read_order(args.order)
    order_ids = order_payload["order"]
    if sorted(order_ids) != sorted(corpus.task_ids):
        raise OrderCorpusMismatch(
            f"order file tasks {sorted(order_ids)} != corpus tasks {sorted(corpus.task_ids)}"
        )
    delta = _resolve(args, "delta", float)
    policy = _resolve(args, "mask_policy")
    if policy not in MASK_POLICIES:
        raise SystemExit2(f"unknown mask policy {policy!r}")
    batch_size = _resolve(args, "batch_size", int)
    records = {t.task_id: sort_task_instances(t, delta, policy) for t in corpus.tasks}
    provenance = {
        "task_order": [int(t) for t in order_ids],
        "batch_size": batch_size,
        "tie_break": "instance_id",
        "mask_policy": policy,
        "delta": delta,
        "n_t": order_payload.get("config", {}).get("n_t"),
        "anneal": order_payload.get("config", {}),
        "anneal_seed": order_payload.get("seed"),
        "manifest_sha256": manifest_sha256(args.manifest),
    }
    schedule = build_schedule(corpus, order_ids, records, batch_size, provenance)
    write_schedule(schedule, out / "schedule.jsonl")
    all_records = [r for tid in order_ids for r in records[tid]]
    write_difficulty_jsonl(all_records, out / "difficulty.jsonl")
    report = verify_schedule(schedule, corpus)
    if not report.valid:
        print(report.to_json(), file=sys.stderr)
        return EXIT_DOMAIN
    print(f"schedule written to {out / 'schedule.jsonl'} ({len(schedule.batches)} batches)")
    return EXIT_OK


def cmd_analyze(args) -> int:
    corpus = _load(args.manifest)
    out = Path(_resolve(args, "out"))
    out.mkdir(parents=True, exist_ok=True)
    threshold = _resolve(args, "threshold", float)
    bins = _resolve(args, "bins", int)
    margins = {t.task_id: task_margins(t) for t in corpus.tasks}
    report = underfitting_report(corpus, margins, threshold)
    report.to_json(out / "underfitting.json")
    print(report.to_table())
    if getattr(args, "gnuplot", False):
        report.to_gnuplot(out / "underfitting.dat")
    all_margins = np.concatenate([margins[t.task_id] for t in corpus.tasks])
    margin_histogram(all_margins, bins).to_json(out / "histogram.json")
    if getattr(args, "order", None):
        payload = read_order(args.order)
        cfg = payload.get("config", {})
        nt = int(cfg.get("n_t", DEFAULT_SAMPLE_SIZE))
        rep_seed = int(cfg.get("representation_seed", payload.get("seed", 0)))
        matrix = _build_matrix(corpus, nt, rep_seed)
        id_to_idx = {tid: i for i, tid in enumerate(matrix.task_ids)}
        idx_order = tuple(id_to_idx[t] for t in payload["order"])
        quality = order_quality(
            TaskOrder(order=idx_order, score=float(payload["score"])),
            matrix,
            random_trials=100,
            seed=_resolve(args, "seed", int),
        )
        quality.to_json(out / "order_quality.json")
    if getattr(args, "schedule", None):
        schedule = read_schedule(args.schedule)
        masked: dict[int, int] = {}
        for batch in schedule.batches:
            masked[batch.task_id] = masked.get(batch.task_id, 0) + sum(
                1 for m in batch.masks if m == 0
            )
        stats = {
            "batches": len(schedule.batches),
            "masked_per_task": {str(k): v for k, v in sorted(masked.items())},
        }
        (out / "schedule_stats.json").write_text(
            json.dumps(stats, indent=2) + "\n", encoding="utf-8"
        )
    return EXIT_OK


def cmd_simulate(args) -> int:
    corpus = _load(args.manifest)
    out = Path(_resolve(args, "out"))
    out.mkdir(parents=True, exist_ok=True)
    schedule = read_schedule(args.schedule)
    steps = _resolve(args, "steps")
    config = ContrastiveConfig(
        temperature=_resolve(args, "temperature", float),
        learning_rate=_resolve(args, "lr", float),
        steps=None if steps is None else int(steps),
        epochs=_resolve(args, "epochs", int),
        seed=_resolve(args, "seed", int),
    )
    encoder, trace = train(corpus, schedule, config)
    write_trace_csv(trace, out / "trace.csv")
    encoder.save(out / "encoder.json")
    print(f"trace written to {out / 'trace.csv'} ({len(trace)} steps)")
    return EXIT_OK


def cmd_synth(args) -> int:
    out = Path(_resolve(args, "out"))
    out.mkdir(parents=True, exist_ok=True)
    corpus = make_synthetic_corpus(
        num_tasks=args.tasks,
        instances_per_task=args.instances,
        dimension=args.dim,
        cluster_spread=args.spread,
        noise_fraction=args.noise,
        seed=_resolve(args, "seed", int),
    )
    save_corpus(corpus, out / "manifest.json")
    print(f"synthetic corpus written to {out / 'manifest.json'}")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    """validate -> order -> schedule -> analyze, sharing one output dir.

    Equivalent to running the stages individually with the same seeds:
    the same stage functions run with the same resolved settings, so the
    artifact bytes are identical.
    """
    corpus = _load(args.manifest)
    report = validate_corpus(corpus)
    if not report.valid:
        print(report.to_json(), file=sys.stderr)
        return EXIT_DOMAIN
    out = Path(_resolve(args, "out"))
    rc = cmd_order(args)
    if rc != EXIT_OK:
        return rc
    args.order = str(out / "order.json")
    rc = cmd_schedule(args)
    if rc != EXIT_OK:
        return rc
    args.schedule = str(out / "schedule.jsonl")
    return cmd_analyze(args)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="curribatch",
        description="Interference-aware data curriculum and mini-batch scheduler",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, manifest=True):
        if manifest:
            p.add_argument("manifest", help="corpus manifest JSON")
        p.add_argument("--config", help="JSON file of flag defaults")
        p.add_argument("--out", help="output directory (env: CURRIBATCH_OUTDIR)")
        p.add_argument("--seed", type=int, help="base seed (env: CURRIBATCH_SEED)")

    p = sub.add_parser("validate", help="check corpus invariants")
    p.add_argument("manifest")
    p.add_argument("--config", help="JSON file of flag defaults")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("order", help="compute the task order by simulated annealing")
    add_common(p)
    p.add_argument("--nt", type=int, help="queries sampled per task representation")
    p.add_argument("--tau0", type=float, help="initial temperature")
    p.add_argument("--alpha", type=float, help="geometric cooling rate")
    p.add_argument("--iters", type=int, help="max annealing iterations")
    p.add_argument("--iters-per-temp", dest="iters_per_temp", type=int,
                   help="iterations per temperature level (default: task count)")
    p.add_argument("--restarts", type=int, help="independent chains, best wins")
    p.add_argument("--two-opt", dest="two_opt", action="store_const", const=True,
                   help="use segment-reversal moves instead of pair swaps")
    p.set_defaults(func=cmd_order)

    p = sub.add_parser("schedule", help="build the mini-batch schedule")
    add_common(p)
    p.add_argument("--order", required=True, help="order JSON from the order stage")
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--delta", type=float, help="noise-mask threshold")
    p.add_argument("--mask-policy", dest="mask_policy", choices=MASK_POLICIES)
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("analyze", help="emit diagnostic reports")
    add_common(p)
    p.add_argument("--schedule", help="schedule JSONL for mask statistics")
    p.add_argument("--order", help="order JSON for order-quality comparison")
    p.add_argument("--threshold", type=float, help="underfitting margin threshold")
    p.add_argument("--bins", type=int, help="margin histogram bins")
    p.add_argument("--gnuplot", action="store_true", help="also emit plot data files")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="run the toy trainer over a schedule")
    add_common(p)
    p.add_argument("--schedule", required=True)
    p.add_argument("--temperature", type=float, help="contrastive softmax temperature")
    p.add_argument("--lr", type=float, help="learning rate")
    p.add_argument("--steps", type=int, help="cap on update steps")
    p.add_argument("--epochs", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("synth", help="generate a synthetic clustered corpus")
    add_common(p, manifest=False)
    p.add_argument("--tasks", type=int, default=4)
    p.add_argument("--instances", type=int, default=64)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--spread", type=float, default=0.1)
    p.add_argument("--noise", type=float, default=0.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pipeline", help="validate, order, schedule and analyze in one go")
    add_common(p)
    p.add_argument("--nt", type=int)
    p.add_argument("--tau0", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--iters", type=int)
    p.add_argument("--iters-per-temp", dest="iters_per_temp", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--two-opt", dest="two_opt", action="store_const", const=True)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--mask-policy", dest="mask_policy", choices=MASK_POLICIES)
    p.add_argument("--threshold", type=float)
    p.add_argument("--bins", type=int)
    p.add_argument("--gnuplot", action="store_true")
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config = {}
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            config = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            print(f"config file not found: {config_path}", file=sys.stderr)
            return EXIT_USAGE
        except json.JSONDecodeError as exc:
            print(f"cannot parse config file {config_path}: {exc}", file=sys.stderr)
            return EXIT_USAGE
    args._config = config
    try:
        return args.func(args)
    except SystemExit2 as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MissingFile as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CurriculumError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry points.

Subcommands: prepare, train-teacher, train-student, evaluate, bench,
sweep.  Every command writes its outputs plus a manifest into one
directory (``--out``, else ``$CODIST_OUT_ROOT/<command>``, else
``runs/<command>``).  Exit codes: 0 success, 1 usage error, 2 runtime
failure.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, RunConfig, load_config
from .data import (
    DatasetError,
    SplitDataset,
    filter_dataset,
    leave_one_out_split,
    load_dataset,
)
from .distill import (
    VARIANTS,
    LossError,
    TrainingError,
    train_student,
    train_teacher,
    variant_config,
)
from .evaluation import EvaluationError, bench_latency, evaluate
from .manifest import MANIFEST_NAME, ManifestError, RunManifest
from .models import (
    ModelError,
    OptimizerError,
    load_checkpoint,
    new_model,
    save_checkpoint,
)

log = logging.getLogger(__name__)

OUT_ROOT_ENV = "CODIST_OUT_ROOT"

_ERRORS = (ConfigError, DatasetError, ModelError, OptimizerError, LossError,
           TrainingError, EvaluationError, ManifestError, OSError, ValueError)


def _out_dir(command, out=None):
    if out is None:
        out = str(Path(os.environ.get(OUT_ROOT_ENV, "runs")) / command)
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_manifest(out, command, options, seed, fingerprint, inputs, outputs):
    man = RunManifest(command=command, options=options, seed=seed,
                      dataset_fingerprint=fingerprint, inputs=inputs,
                      out_dir=str(out), outputs=sorted(outputs))
    man.save(out / MANIFEST_NAME)
    return man


def _write_trace(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def _new_model_for(cfg, train, seed):
    return new_model(cfg.model.kind, train.num_users, train.num_items,
                     cfg.model.dim, seed, std=cfg.model.init_std,
                     corruption=cfg.model.corruption)


def run_prepare(dataset, fmt=None, min_user=10, min_item=5, out_dir=None):
    out = _out_dir("prepare", out_dir)
    raw = load_dataset(dataset, fmt)
    filtered = filter_dataset(raw, min_user=min_user, min_item=min_item)
    split = leave_one_out_split(filtered)
    filtered.save(out / "dataset.bin")
    split.save(out / "split.bin")
    print(f"loaded {raw.num_users} users / {raw.num_items} items / "
          f"{raw.num_interactions} interactions")
    print(f"filtered to {filtered.num_users} users / {filtered.num_items} items / "
          f"{filtered.num_interactions} interactions")
    return _write_manifest(
        out, "prepare",
        {"dataset": str(dataset), "fmt": fmt,
         "min_user": min_user, "min_item": min_item},
        None, filtered.fingerprint(), {"dataset": str(dataset)},
        ["dataset.bin", "split.bin"])


def _finish_training(out, command, options, seed, split_ds, result, inputs):
    save_checkpoint(result.model, out / "checkpoint.bin")
    _write_trace(out / "trace.jsonl", result.trace)
    man = _write_manifest(out, command, options, seed, split_ds.fingerprint(),
                          inputs, ["checkpoint.bin", "trace.jsonl"])
    if result.trace:
        print(f"epoch {result.trace[-1]['epoch']}: "
              f"total loss {result.trace[-1]['total']:.6f}")
    if result.diverged:
        raise TrainingError(
            f"training diverged after epoch {result.epochs_run}; "
            f"checkpoint holds the last stable parameters")
    return man


def run_train_teacher(config, split, out_dir=None):
    out = _out_dir("train-teacher", out_dir)
    cfg = RunConfig.from_dict(config)
    split_ds = SplitDataset.load(split)
    model = _new_model_for(cfg, split_ds.train, cfg.train.seed)
    result = train_teacher(model, split_ds.train, cfg.optimizer,
                           cfg.train.epochs, cfg.train.seed,
                           cfg.train.negative_ratio)
    return _finish_training(out, "train-teacher",
                            {"config": cfg.to_dict(), "split": str(split)},
                            cfg.train.seed, split_ds, result,
                            {"split": str(split)})


def run_train_student(config, variant, split, teacher=None, out_dir=None):
    out = _out_dir("train-student", out_dir)
    cfg = RunConfig.from_dict(config)
    dcfg = variant_config(variant, cfg.distill)
    teacher_path = teacher or cfg.teacher_checkpoint
    teacher_model = None
    if variant != "plain":
        if not teacher_path:
            raise TrainingError(
                f"variant {variant!r} distills from a teacher; "
                f"set teacher.checkpoint in the config or pass --teacher")
        if not Path(teacher_path).exists():
            raise TrainingError(f"teacher checkpoint not found: {teacher_path}")
        teacher_model = load_checkpoint(teacher_path)
    split_ds = SplitDataset.load(split)
    student = _new_model_for(cfg, split_ds.train, cfg.train.seed)
    result = train_student(student, teacher_model, split_ds.train, dcfg,
                           cfg.optimizer, cfg.train.epochs, cfg.train.seed,
                           cfg.train.negative_ratio)
    inputs = {"split": str(split)}
    if teacher_path:
        inputs["teacher"] = str(teacher_path)
    return _finish_training(out, "train-student",
                            {"config": cfg.to_dict(), "variant": variant,
                             "split": str(split),
                             "teacher": str(teacher_path) if teacher_path else None},
                            cfg.train.seed, split_ds, result, inputs)


def run_evaluate(checkpoint, split, n=50, out_dir=None):
    out = _out_dir("evaluate", out_dir)
    model = load_checkpoint(checkpoint)
    split_ds = SplitDataset.load(split)
    report = evaluate(model, split_ds, n)
    report.save(out / "report.json")
    print(f"HR@{n} {report.hr:.6f}  NDCG@{n} {report.ndcg:.6f}  "
          f"({report.ranks.size} users, {report.skipped} skipped)")
    return _write_manifest(
        out, "evaluate",
        {"checkpoint": str(checkpoint), "split": str(split), "n": n},
        None, split_ds.fingerprint(),
        {"checkpoint": str(checkpoint), "split": str(split)},
        ["report.json"])


def run_bench(checkpoint, split, repetitions=100, warmup=3, out_dir=None):
    out = _out_dir("bench", out_dir)
    model = load_checkpoint(checkpoint)
    split_ds = SplitDataset.load(split)
    stats = bench_latency(model, split_ds.train, repetitions=repetitions,
                          warmup=warmup)
    with open(out / "latency.json", "w", encoding="utf-8") as fh:
        json.dump(stats, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"mean {stats['mean'] * 1e6:.1f} us/user over {stats['samples']} samples "
          f"({stats['param_count']} parameters)")
    return _write_manifest(
        out, "bench",
        {"checkpoint": str(checkpoint), "split": str(split),
         "repetitions": repetitions, "warmup": warmup},
        None, split_ds.fingerprint(),
        {"checkpoint": str(checkpoint), "split": str(split)},
        ["latency.json"])


def size_label(student_params, teacher_params):
    """XS/S/M when the student is ~10/20/30% of the teacher's size."""
    if teacher_params <= 0:
        return ""
    ratio = student_params / teacher_params
    for target, label in ((0.1, "XS"), (0.2, "S"), (0.3, "M")):
        if abs(ratio - target) < 0.05:
            return label
    return ""


_SWEEP_COLUMNS = ("hr", "ndcg", "param_count", "size_label", "latency_mean",
                  "status", "error")


def run_sweep(config, split, out_dir=None):
    """Train/evaluate one student per grid cell; aggregate into a table.

    Cell failures are recorded in the table and the sweep moves on.
    Latency is measured only when sweep.latency_reps > 0, because wall
    clock readings are machine-dependent and would break re-run equality
    of the results table.
    """
    out = _out_dir("sweep", out_dir)
    cfg = RunConfig.from_dict(config)
    sweep = cfg.sweep or {}
    variant = sweep.get("variant", "cd-tg")
    grid = sweep.get("grid") or {}
    latency_reps = sweep.get("latency_reps", 0)
    split_ds = SplitDataset.load(split)

    teacher_model = None
    if variant != "plain":
        if not cfg.teacher_checkpoint:
            raise TrainingError(
                f"sweep variant {variant!r} distills from a teacher; "
                f"set teacher.checkpoint in the config")
        teacher_model = load_checkpoint(cfg.teacher_checkpoint)
    teacher_params = teacher_model.param_count() if teacher_model else 0

    keys = sorted(grid)
    cells = list(itertools.product(*(grid[k] for k in keys))) if keys else [()]
    rows = []
    for values in cells:
        cell = dict(zip(keys, values))
        row = {**cell,
               "hr": None, "ndcg": None, "param_count": None,
               "size_label": "", "latency_mean": None,
               "status": "ok", "error": ""}
        try:
            cell_cfg = replace(cfg.model, dim=cell.get("dim", cfg.model.dim))
            dcfg = replace(cfg.distill,
                           **{k: v for k, v in cell.items() if k != "dim"})
            dcfg = variant_config(variant, dcfg)
            student = new_model(cell_cfg.kind, split_ds.train.num_users,
                                split_ds.train.num_items, cell_cfg.dim,
                                cfg.train.seed, std=cell_cfg.init_std,
                                corruption=cell_cfg.corruption)
            result = train_student(student, teacher_model, split_ds.train,
                                   dcfg, cfg.optimizer, cfg.train.epochs,
                                   cfg.train.seed, cfg.train.negative_ratio)
            if result.diverged:
                raise TrainingError("training diverged")
            report = evaluate(student, split_ds, cfg.n_cutoff)
            row["hr"] = report.hr
            row["ndcg"] = report.ndcg
            row["param_count"] = student.param_count()
            row["size_label"] = size_label(student.param_count(), teacher_params)
            if latency_reps > 0:
                stats = bench_latency(student, split_ds.train,
                                      repetitions=latency_reps, warmup=1)
                row["latency_mean"] = stats["mean"]
        except _ERRORS as exc:
            row["status"] = "error"
            row["error"] = str(exc)
        rows.append(row)

    rows.sort(key=lambda r: (r["status"] != "ok",
                             -(r["ndcg"] if r["ndcg"] is not None else -1.0)))
    columns = list(keys) + list(_SWEEP_COLUMNS)
    with open(out / "results.tsv", "w", encoding="utf-8") as fh:
        fh.write("\t".join(columns) + "\n")
        for row in rows:
            fh.write("\t".join(_cell_str(row[c]) for c in columns) + "\n")
    with open(out / "results.json", "w", encoding="utf-8") as fh:
        json.dump({"variant": variant, "columns": columns, "rows": rows},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    ok = sum(1 for r in rows if r["status"] == "ok")
    print(f"sweep: {ok}/{len(rows)} cells succeeded; table at {out / 'results.tsv'}")
    return _write_manifest(
        out, "sweep", {"config": cfg.to_dict(), "split": str(split)},
        cfg.train.seed, split_ds.fingerprint(), {"split": str(split)},
        ["results.tsv", "results.json"])


def _cell_str(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


RUNNERS = {
    "prepare": run_prepare,
    "train-teacher": run_train_teacher,
    "train-student": run_train_student,
    "evaluate": run_evaluate,
    "bench": run_bench,
    "sweep": run_sweep,
}


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; contract says 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="codist",
                     description="top-N recommendation distillation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="load, filter, and split raw interactions")
    p.add_argument("--dataset", required=True, help="raw interaction file")
    p.add_argument("--format", choices=["triples-tsv", "triples-csv"],
                   default=None, help="input format (default: by extension)")
    p.add_argument("--min-user", type=int, default=10)
    p.add_argument("--min-item", type=int, default=5)
    p.add_argument("--out", default=None)

    for name, help_ in (("train-teacher", "fit a teacher model"),
                        ("train-student", "distill a student model")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="YAML run config")
        p.add_argument("--dataset", required=True, help="split file from prepare")
        p.add_argument("--seed", type=int, default=None,
                       help="override train.seed from the config")
        p.add_argument("--out", default=None)
        if name == "train-student":
            p.add_argument("--variant", required=True, choices=list(VARIANTS))
            p.add_argument("--teacher", default=None,
                           help="teacher checkpoint (overrides the config)")

    p = sub.add_parser("evaluate", help="leave-one-out ranking metrics")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True, help="split file from prepare")
    p.add_argument("--n", type=int, default=50, help="ranking cutoff")
    p.add_argument("--out", default=None)

    p = sub.add_parser("bench", help="per-user inference latency")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True, help="split file from prepare")
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--warmup", type=int, default=3)
    p.add_argument("--out", default=None)

    p = sub.add_parser("sweep", help="grid of student runs, aggregated table")
    p.add_argument("--config", required=True, help="YAML config with a sweep section")
    p.add_argument("--dataset", required=True, help="split file from prepare")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)

    return parser


def _config_dict(path, seed_override):
    cfg = load_config(path)
    if seed_override is not None:
        cfg.train.seed = seed_override
    return cfg.validate().to_dict()


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "prepare":
            run_prepare(args.dataset, args.format, args.min_user,
                        args.min_item, args.out)
        elif args.command == "train-teacher":
            run_train_teacher(_config_dict(args.config, args.seed),
                              args.dataset, args.out)
        elif args.command == "train-student":
            run_train_student(_config_dict(args.config, args.seed),
                              args.variant, args.dataset, args.teacher, args.out)
        elif args.command == "evaluate":
            run_evaluate(args.checkpoint, args.dataset, args.n, args.out)
        elif args.command == "bench":
            run_bench(args.checkpoint, args.dataset, args.reps,
                      args.warmup, args.out)
        elif args.command == "sweep":
            run_sweep(_config_dict(args.config, args.seed),
                      args.dataset, args.out)
        return 0
    except _ERRORS as exc:
        print(f"codist: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

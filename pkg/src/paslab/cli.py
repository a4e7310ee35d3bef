"""Command-line experiment runner.

    paslab schedule        --config cfg.json [--out DIR]
    paslab sample          --config cfg.json
    paslab train-pas       --config cfg.json
    paslab correct-sample  --config cfg.json --table table.json
    paslab analyze-subspace --config cfg.json
    paslab error-curve     --config cfg.json [--table table.json]
    paslab report          RUN_DIR

Exit codes: 0 success, 2 validation, 3 numerical failure, 4 I/O or integrity.
Environment: PASLAB_OUT overrides the output directory, PASLAB_THREADS the
thread bound.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from paslab import metrics
from paslab.config import EVAL_STREAM, TRAIN_STREAM, ConfigError, initial_noises, load_config
from paslab.errors import DivergenceError, IncompatibleTableError, InvalidArgumentError
from paslab.pas import CorrectionTable, sample_with_correction, train_pas
from paslab.scorefield import exact_trajectory
from paslab.solvers import generate_ground_truth, sample
from paslab.timegrid import build_schedule
from paslab.subspace import cumulative_variance
from paslab.trajio import pack_trajectory, trajectory_csv

log = logging.getLogger("paslab")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4
MANIFEST = "manifest.json"


class IntegrityError(Exception):
    pass


def sha256_file(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class Run:
    """Collects artifacts for one subcommand and writes them, then the manifest."""

    def __init__(self, subcommand, cfg, out_dir, seed, threads):
        self.subcommand = subcommand
        self.cfg = cfg
        self.out = Path(out_dir)
        self.seed = seed
        self.threads = threads
        self.files: dict = {}
        self.inputs: dict = {}
        self.started = time.perf_counter()

    def add(self, name, content):
        self.files[name] = content

    def commit(self):
        self.out.mkdir(parents=True, exist_ok=True)
        checksums = {}
        for name, content in sorted(self.files.items()):
            path = self.out / name
            path.parent.mkdir(parents=True, exist_ok=True)
            if isinstance(content, bytes):
                path.write_bytes(content)
            else:
                path.write_text(content)
            checksums[name] = sha256_file(path)
        manifest_path = self.out / MANIFEST
        manifest = {"runs": {}}
        if manifest_path.exists():
            try:
                manifest = json.loads(manifest_path.read_text())
            except json.JSONDecodeError:
                manifest = {"runs": {}}
        manifest.setdefault("runs", {})[self.subcommand] = {
            "config_hash": self.cfg.hash(),
            "config": json.loads(self.cfg.canonical_json()),
            "seed": self.seed,
            "threads": self.threads,
            "artifacts": checksums,
            "inputs": self.inputs,
            "wall_time_s": round(time.perf_counter() - self.started, 3),
        }
        manifest_path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
        return checksums


# ---------------------------------------------------------------------------
# shared helpers


def _ground_truth(model, schedule, x_T, cfg):
    """Exact states for a single Gaussian, otherwise the configured teacher."""
    if model.is_single_gaussian:
        return np.stack([exact_trajectory(model, x_T, t, schedule.t_max) if t < schedule.t_max else x_T
                         for t in schedule.times])
    return generate_ground_truth(model, schedule, x_T, cfg.eval.teacher_steps, cfg.eval.teacher_kind)


def _eval_noises(cfg, model, seed):
    return initial_noises(seed, EVAL_STREAM, cfg.eval.samples, model.dimension, cfg.schedule.t_max)


def _curve_meta(cfg, corrected):
    spec = cfg.solver_spec()
    solver = spec.kind if spec.order is None else f"{spec.kind}{spec.order}"
    return {"solver": solver, "N": cfg.schedule.n, "corrected": corrected}


def _dump_trajectories(run, record, cfg, prefix):
    ext = "csv" if cfg.eval.dump_format == "csv" else "bin"
    for b in range(min(cfg.eval.dump_trajectories, record.states.shape[1])):
        states, dirs = record.states[:, b], record.directions[:, b]
        encode = trajectory_csv if cfg.eval.dump_format == "csv" else pack_trajectory
        run.add(f"trajectories/{prefix}_{b:05d}.{ext}", encode(record.schedule.times, states, dirs))


def _final_summary(cfg, finals, gt_final):
    return {
        "mean_l2_distance": metrics.mean_final_distance(finals, gt_final, "l2"),
        "mse": metrics.final_state_error(finals, gt_final, "l2"),
        "mean_l1": metrics.final_state_error(finals, gt_final, "l1"),
    }



# ---------------------------------------------------------------------------
# subcommands


def cmd_schedule(run, cfg, args):
    run.add("schedule.csv", cfg.build_schedule().to_csv())


def cmd_sample(run, cfg, args):
    model, schedule, spec = cfg.build_model(), cfg.build_schedule(), cfg.solver_spec()
    x_T = _eval_noises(cfg, model, run.seed)
    record = sample(model, spec, schedule, x_T)
    gt = _ground_truth(model, schedule, x_T, cfg)
    curve = metrics.truncation_error_curve(record, gt, cfg.eval.norm, cfg.eval.per_dimension,
                                           _curve_meta(cfg, False))
    run.add("error_curve.csv", curve.to_csv())
    run.add("baseline_summary.json", _json({"baseline": _final_summary(cfg, record.final, gt[0])}))
    _dump_trajectories(run, record, cfg, "sample")


def cmd_train(run, cfg, args):
    model, schedule, spec = cfg.build_model(), cfg.build_schedule(), cfg.solver_spec()
    x_T = initial_noises(run.seed, TRAIN_STREAM, cfg.train.trajectory_count, model.dimension, cfg.schedule.t_max)
    # the global seed drives the training noises, so it is what the table records
    table = train_pas(model, spec, schedule, x_T, dataclasses.replace(cfg.train, seed=run.seed))
    run.add("table.json", table.to_json())
    lines = ["step,loss_corrected,loss_uncorrected,tau,accepted,coords"]
    for s in table.log:
        coords = " ".join(repr(c) for c in s.coords)
        lines.append(f"{s.step},{s.loss_corrected!r},{s.loss_uncorrected!r},{s.tau!r},{int(s.accepted)},{coords}")
    run.add("training_log.csv", "\n".join(lines) + "\n")


def _load_table(args, cfg):
    if not args.table:
        raise ConfigError("--table is required for this subcommand")
    table = CorrectionTable.load(args.table)
    table.check_compatible(cfg.solver_spec(), cfg.build_schedule())
    return table


def cmd_correct(run, cfg, args):
    table = _load_table(args, cfg)
    run.inputs["table"] = {"path": str(args.table), "sha256": sha256_file(args.table)}
    model, schedule, spec = cfg.build_model(), cfg.build_schedule(), cfg.solver_spec()
    x_T = _eval_noises(cfg, model, run.seed)
    base = sample(model, spec, schedule, x_T)
    corr = sample_with_correction(model, spec, schedule, x_T, table)
    gt = _ground_truth(model, schedule, x_T, cfg)
    for name, rec, flag in (("baseline", base, False), ("corrected", corr, True)):
        curve = metrics.truncation_error_curve(rec, gt, cfg.eval.norm, cfg.eval.per_dimension,
                                               _curve_meta(cfg, flag))
        run.add(f"error_curve_{name}.csv", curve.to_csv())
    b, c = _final_summary(cfg, base.final, gt[0]), _final_summary(cfg, corr.final, gt[0])
    reduction = 1.0 - c["mean_l2_distance"] / b["mean_l2_distance"] if b["mean_l2_distance"] > 0 else 0.0
    run.add("correction_summary.json", _json({
        "baseline": b, "corrected": c, "reduction_mean_l2": reduction,
        "corrected_steps": table.steps, "parameter_count": table.parameter_count,
        "identical_to_baseline": bool(np.array_equal(base.states, corr.states)),
    }))
    _dump_trajectories(run, corr, cfg, "corrected")


def cmd_subspace(run, cfg, args):
    model, spec = cfg.build_model(), cfg.solver_spec()
    s = cfg.schedule
    fine = build_schedule(s.rho, s.t_min, s.t_max, cfg.eval.subspace_points - 1)
    x_T = initial_noises(run.seed, EVAL_STREAM, cfg.eval.subspace_trajectories, model.dimension, s.t_max)
    record = sample(model, spec, fine, x_T)
    k = cfg.eval.max_components
    per = []
    lines = ["trajectory,components,cumulative_fraction"]
    for b in range(x_T.shape[0]):
        rows = np.vstack([x_T[b], record.directions[::-1, b]])
        frac = cumulative_variance(rows, k)
        per.append(frac)
        lines += [f"{b},{j + 1},{f!r}" for j, f in enumerate(frac)]
    run.add("subspace_per_trajectory.csv", "\n".join(lines) + "\n")
    avg = np.mean(per, axis=0)
    run.add("subspace_single.csv", _fraction_csv(avg))
    pooled = cumulative_variance(record.states.transpose(1, 0, 2).reshape(-1, model.dimension), k)
    run.add("subspace_pooled.csv", _fraction_csv(pooled))


def _fraction_csv(frac):
    return "components,cumulative_fraction\n" + "".join(f"{j + 1},{f!r}\n" for j, f in enumerate(frac))


def cmd_error_curve(run, cfg, args):
    model, schedule, spec = cfg.build_model(), cfg.build_schedule(), cfg.solver_spec()
    table = _load_table(args, cfg) if args.table else None
    x_T = _eval_noises(cfg, model, run.seed)
    gt = _ground_truth(model, schedule, x_T, cfg)
    base = sample(model, spec, schedule, x_T)
    curves = {"uncorrected": metrics.truncation_error_curve(base, gt, cfg.eval.norm, cfg.eval.per_dimension,
                                                            _curve_meta(cfg, False))}
    if table is not None:
        run.inputs["table"] = {"path": str(args.table), "sha256": sha256_file(args.table)}
        corr = sample_with_correction(model, spec, schedule, x_T, table)
        curves["corrected"] = metrics.truncation_error_curve(corr, gt, cfg.eval.norm, cfg.eval.per_dimension,
                                                             _curve_meta(cfg, True))
    stats = {}
    for name, curve in curves.items():
        run.add(f"curve_{name}.csv", curve.to_csv())
        if len(curve.errors) >= 4:
            argmax, head, mid, tail = metrics.s_shape_stats(curve)
            stats[name] = {"argmax_increment_step": argmax, "head": head, "mid": mid, "tail": tail}
    run.add("s_shape.json", _json(stats))


def _json(obj):
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


COMMANDS = {
    "schedule": cmd_schedule,
    "sample": cmd_sample,
    "train-pas": cmd_train,
    "correct-sample": cmd_correct,
    "analyze-subspace": cmd_subspace,
    "error-curve": cmd_error_curve,
}


# ---------------------------------------------------------------------------
# report


def report(run_dir) -> str:
    run_dir = Path(run_dir)
    path = run_dir / MANIFEST
    if not path.exists():
        raise FileNotFoundError(f"no {MANIFEST} in {run_dir}")
    manifest = json.loads(path.read_text())
    for sub, entry in manifest.get("runs", {}).items():
        for name, digest in entry.get("artifacts", {}).items():
            target = run_dir / name
            if not target.exists():
                raise IntegrityError(f"{sub}: artifact {name} is missing")
            if sha256_file(target) != digest:
                raise IntegrityError(f"{sub}: checksum mismatch for {name}")

    runs = manifest.get("runs", {})
    lines = [f"run directory: {run_dir}"]
    table_path = run_dir / "table.json"
    if "train-pas" in runs and table_path.exists():
        table = CorrectionTable.load(table_path)
        lines.append(_table_line(table))
    if "correct-sample" in runs:
        summary = json.loads((run_dir / "correction_summary.json").read_text())
        steps = summary["corrected_steps"]
        lines.append(f"corrected steps: {_steps_text(steps)} ({summary['parameter_count']} parameters)")
        if not steps:
            lines.append("0 corrected steps; outputs identical to baseline")
        b, c = summary["baseline"]["mean_l2_distance"], summary["corrected"]["mean_l2_distance"]
        lines.append(f"final L2 error: uncorrected {b:.6g}  corrected {c:.6g}  "
                     f"reduction {100 * summary['reduction_mean_l2']:.1f}%")
    elif "sample" in runs:
        summary = json.loads((run_dir / "baseline_summary.json").read_text())
        lines.append(f"final L2 error (uncorrected): {summary['baseline']['mean_l2_distance']:.6g}")
    for sub, entry in sorted(runs.items()):
        lines.append(f"{sub}: seed {entry['seed']}, config {entry['config_hash'][:12]}, "
                     f"wall time {entry['wall_time_s']:.2f}s")
    return "\n".join(lines) + "\n"


def _steps_text(steps):
    return ",".join(str(s) for s in steps) if steps else "none"


def _table_line(table: CorrectionTable):
    n = table.schedule["n"]
    if not table.entries:
        return f"table: N={n}, 0 corrected steps; outputs identical to baseline"
    return (f"table: N={n} ({table.solver.kind}), corrected steps {_steps_text(table.steps)}, "
            f"{len(table.entries)} x {table.basis_k} = {table.parameter_count} parameters")


# ---------------------------------------------------------------------------
# entry point


def build_parser():
    parser = argparse.ArgumentParser(prog="paslab", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--out", help="output directory (overrides config and PASLAB_OUT)")
        p.add_argument("--seed", type=int, help="global seed (overrides config)")
        p.add_argument("--threads", type=int, help="thread bound for per-sample work")
        p.add_argument("--table", help="correction table JSON")
        p.add_argument("-v", "--verbose", action="store_true")
    p = sub.add_parser("report")
    p.add_argument("run_dir")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code else EXIT_OK

    if args.command == "report":
        try:
            sys.stdout.write(report(args.run_dir))
        except (IntegrityError, FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
        return EXIT_OK

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0 or args.seed >= 2 ** 64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg.seed = args.seed
        out = args.out or os.environ.get("PASLAB_OUT") or cfg.output_dir
        threads = args.threads or int(os.environ.get("PASLAB_THREADS", "1"))
        if threads < 1:
            raise ConfigError("--threads must be >= 1")
        run = Run(args.command, cfg, out, cfg.seed, threads)
        COMMANDS[args.command](run, cfg, args)
        run.commit()
    except (ConfigError, IncompatibleTableError, InvalidArgumentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (DivergenceError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, json.JSONDecodeError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

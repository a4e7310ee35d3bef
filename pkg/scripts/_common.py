"""Shared plumbing for the experiment scripts."""

import argparse
import csv
from pathlib import Path

import numpy as np

from paslab.config import EVAL_STREAM, TRAIN_STREAM, initial_noises
from paslab.metrics import mean_final_distance
from paslab.pas import sample_with_correction, train_pas
from paslab.scorefield import exact_trajectory
from paslab.solvers import sample


def parser(description, default_out):
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--out", default=default_out, help="directory for CSV outputs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=512)
    return p


def noises(seed, count, dim, t_max=80.0):
    return initial_noises(seed, TRAIN_STREAM, count, dim, t_max), initial_noises(seed, EVAL_STREAM, count, dim, t_max)


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    print(f"wrote {path}")


def evaluate(model, spec, schedule, table, x_T):
    """(uncorrected, corrected) mean final L2 distance to the exact solution."""
    exact = exact_trajectory(model, x_T, schedule.t_min, schedule.t_max)
    base = sample(model, spec, schedule, x_T).final
    corr = sample_with_correction(model, spec, schedule, x_T, table).final
    return mean_final_distance(base, exact), mean_final_distance(corr, exact)


def train_and_evaluate(model, spec, schedule, config, train, held):
    table = train_pas(model, spec, schedule, train, config)
    b_tr, c_tr = evaluate(model, spec, schedule, table, train)
    b_ho, c_ho = evaluate(model, spec, schedule, table, held)
    return table, {"train_base": b_tr, "train_corr": c_tr, "held_base": b_ho, "held_corr": c_ho,
                   "held_reduction": 1 - c_ho / b_ho}


__all__ = ["parser", "noises", "write_csv", "evaluate", "train_and_evaluate", "np"]

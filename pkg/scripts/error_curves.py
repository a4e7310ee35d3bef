"""Per-step truncation error curves, uncorrected and corrected.

Writes the Euler N=10 curve for the symmetric two-component mixture (against
the Heun teacher) and for the rank-2 manifold (against the exact solution,
with and without a trained correction table).

    python scripts/error_curves.py --out results/curves
"""

import numpy as np
from _common import noises, parser, write_csv

from paslab.metrics import s_shape_stats, truncation_error_curve
from paslab.pas import TrainConfig, sample_with_correction, train_pas
from paslab.scorefield import exact_trajectory, mixture_symmetric, rank_manifold
from paslab.solvers import SolverSpec, generate_ground_truth, sample
from paslab.timegrid import build_schedule


def main():
    args = parser(__doc__.splitlines()[0], "results/curves").parse_args()
    schedule = build_schedule(n_steps=10)
    euler = SolverSpec("euler")

    mix = mixture_symmetric(dim=16, seed=args.seed)
    _, x_T = noises(args.seed, args.samples, 16)
    gt = generate_ground_truth(mix, schedule, x_T, 100, "heun")
    curve = truncation_error_curve(sample(mix, euler, schedule, x_T), gt)
    argmax, head, mid, tail = s_shape_stats(curve)
    print(f"mixture: largest increment at step {argmax}; head {head:.3g} mid {mid:.3g} tail {tail:.3g}")
    write_csv(f"{args.out}/mixture_euler10.csv", ["step", "time", "error"],
              zip(curve.step_indices, curve.times, curve.errors))

    model = rank_manifold(dim=64, seed=args.seed)
    train, held = noises(args.seed, args.samples, 64)
    table = train_pas(model, euler, schedule, train, TrainConfig(trajectory_count=args.samples))
    gt = np.stack([exact_trajectory(model, held, t, 80.0) for t in schedule.times])
    base = truncation_error_curve(sample(model, euler, schedule, held), gt)
    corr = truncation_error_curve(sample_with_correction(model, euler, schedule, held, table), gt)
    print(f"manifold: corrected steps {table.steps}; final error {base.errors[-1]:.4f} -> {corr.errors[-1]:.4f}")
    write_csv(f"{args.out}/manifold_euler10.csv", ["step", "time", "uncorrected", "corrected"],
              zip(base.step_indices, base.times, base.errors, corr.errors))


if __name__ == "__main__":
    main()

"""Correction benefit on the rank-2 manifold Gaussian (D=64) for Euler and iPNDM students.

Sweeps N in {5, 6, 8, 10} and both coordinate parameterisations and writes
one row per configuration with train / held-out errors and the corrected steps.

    python scripts/headline.py --out results/headline
"""

from dataclasses import replace

from _common import noises, parser, train_and_evaluate, write_csv

from paslab.pas import TrainConfig
from paslab.scorefield import rank_manifold
from paslab.solvers import SolverSpec
from paslab.timegrid import build_schedule


def main():
    args = parser(__doc__.splitlines()[0], "results/headline").parse_args()
    model = rank_manifold(dim=64, seed=args.seed)
    train, held = noises(args.seed, args.samples, 64)
    base_cfg = TrainConfig(trajectory_count=args.samples, seed=args.seed)
    rows = []
    for spec, lr in ((SolverSpec("euler"), 1e-2), (SolverSpec.ipndm(3), 1e-3)):
        for n in (5, 6, 8, 10):
            schedule = build_schedule(n_steps=n)
            for param in ("absolute", "relative"):
                cfg = replace(base_cfg, parameterization=param, learning_rate=lr)
                table, r = train_and_evaluate(model, spec, schedule, cfg, train, held)
                solver = spec.kind + (str(spec.order) if spec.order else "")
                steps = ",".join(map(str, table.steps))
                print(f"{solver:7s} N={n:2d} {param:8s} held-out {r['held_base']:.4f} -> {r['held_corr']:.4f} "
                      f"({100 * r['held_reduction']:5.1f}%) steps {steps or '-'}")
                rows.append([solver, n, param, r["train_base"], r["train_corr"], r["held_base"], r["held_corr"],
                             r["held_reduction"], steps, table.parameter_count])
    write_csv(f"{args.out}/headline.csv",
              ["solver", "n", "parameterization", "train_uncorrected", "train_corrected", "heldout_uncorrected",
               "heldout_corrected", "heldout_reduction", "corrected_steps", "parameters"], rows)


if __name__ == "__main__":
    main()

"""Cumulative explained variance of sampling trajectories (single vs pooled).

Single-trajectory rows are the exact states along a 100-point schedule; the
pooled matrix stacks 100 such trajectories.  Both Euler sampling directions
({x_T, d_N..d_1}) and exact states are analysed.

    python scripts/subspace.py --out results/subspace
"""

import numpy as np
from _common import noises, parser, write_csv

from paslab.scorefield import exact_trajectory, rank_manifold
from paslab.solvers import SolverSpec, sample
from paslab.subspace import cumulative_variance
from paslab.timegrid import build_schedule

K = 10


def main():
    args = parser(__doc__.splitlines()[0], "results/subspace").parse_args()
    model = rank_manifold(dim=64, seed=args.seed)
    fine = build_schedule(n_steps=99)
    _, x_T = noises(args.seed, 100, 64)
    exact = np.stack([exact_trajectory(model, x_T, t, 80.0) for t in fine.times])  # (100, B, D)
    rec = sample(model, SolverSpec("euler"), fine, x_T)

    single_states = np.mean([cumulative_variance(exact[:, b], K) for b in range(x_T.shape[0])], axis=0)
    single_dirs = np.mean([cumulative_variance(np.vstack([x_T[b], rec.directions[::-1, b]]), K)
                           for b in range(x_T.shape[0])], axis=0)
    pooled = cumulative_variance(exact.transpose(1, 0, 2).reshape(-1, 64), K)
    rows = [[j + 1, single_states[j], single_dirs[j], pooled[j]] for j in range(K)]
    for r in rows[:4]:
        print("k=%d  single(states) %.5f  single(directions) %.5f  pooled %.4f" % tuple(r))
    write_csv(f"{args.out}/cumulative_variance.csv",
              ["components", "single_states", "single_directions", "pooled_states"], rows)


if __name__ == "__main__":
    main()

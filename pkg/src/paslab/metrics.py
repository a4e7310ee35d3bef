"""Losses, truncation-error curves and S-shape diagnostics.

The per-sample losses here are the same functions the coordinate trainer
differentiates, so reported errors and training objectives cannot drift apart.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from paslab.errors import InvalidArgumentError

PSEUDO_HUBER_C = 0.03
LOSS_KINDS = ("l1", "l2", "pseudo_huber")


def sample_loss(residual, kind="l1", c=PSEUDO_HUBER_C):
    """Per-sample loss of residual rows (..., D).

    l1: |r|_1; l2: |r|_2^2; pseudo_huber: sqrt(|r|_2^2 + c^2) - c.
    """
    r = np.asarray(residual, dtype=np.float64)
    if kind == "l1":
        return np.sum(np.abs(r), axis=-1)
    if kind == "l2":
        return np.sum(r * r, axis=-1)
    if kind == "pseudo_huber":
        return np.sqrt(np.sum(r * r, axis=-1) + c * c) - c
    raise InvalidArgumentError(f"unknown loss {kind!r}; choose from {LOSS_KINDS}")


def sample_loss_grad(residual, kind="l1", c=PSEUDO_HUBER_C):
    """d(sample_loss)/d(residual), same shape as residual (sign subgradient for l1)."""
    r = np.asarray(residual, dtype=np.float64)
    if kind == "l1":
        return np.sign(r)
    if kind == "l2":
        return 2.0 * r
    if kind == "pseudo_huber":
        return r / np.sqrt(np.sum(r * r, axis=-1, keepdims=True) + c * c)
    raise InvalidArgumentError(f"unknown loss {kind!r}; choose from {LOSS_KINDS}")


def distance(a, b, norm="l2", per_dimension=False):
    """|a - b| along the last axis; ``per_dimension`` divides by D (l1) or sqrt(D) (l2)."""
    r = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    dim = r.shape[-1]
    if norm == "l1":
        out = np.sum(np.abs(r), axis=-1)
        return out / dim if per_dimension else out
    if norm == "l2":
        out = np.sqrt(np.sum(r * r, axis=-1))
        return out / np.sqrt(dim) if per_dimension else out
    raise InvalidArgumentError(f"norm must be l1 or l2, got {norm!r}")


@dataclass
class ErrorCurve:
    """Errors ordered along sampling: ``step_indices[j]`` runs N, N-1, ..., 0."""

    step_indices: np.ndarray
    times: np.ndarray
    errors: np.ndarray
    norm: str = "l2"
    per_dimension: bool = False
    meta: dict = field(default_factory=dict)

    def at(self, i):
        return self.errors[self.step_indices.tolist().index(i)]

    def to_csv(self) -> str:
        header = ",".join(f"{k}={v}" for k, v in sorted(self.meta.items()))
        lines = [f"# {header},norm={self.norm},per_dimension={self.per_dimension}", "step,time,error"]
        lines += [f"{i},{t!r},{e!r}" for i, t, e in zip(self.step_indices.tolist(), self.times.tolist(),
                                                         self.errors.tolist())]
        return "\n".join(lines) + "\n"


def truncation_error_curve(traj, gt, norm="l2", per_dimension=False, meta=None) -> ErrorCurve:
    """Per-step distance to the ground truth; batched states give the mean of per-sample distances.

    ``traj`` is a TrajectoryRecord (or a state array indexed by step) and
    ``gt[i]`` the ground-truth state at step i.
    """
    states = traj.states if hasattr(traj, "states") else np.asarray(traj, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if states.shape != gt.shape:
        raise InvalidArgumentError(f"trajectory shape {states.shape} != ground-truth shape {gt.shape}")
    n = states.shape[0] - 1
    dist = distance(states, gt, norm, per_dimension)
    if dist.ndim > 1:
        dist = dist.reshape(n + 1, -1).mean(axis=1)
    order = np.arange(n, -1, -1)
    times = traj.schedule.times[order] if hasattr(traj, "schedule") else order.astype(float)
    return ErrorCurve(order, times, dist[order], norm, per_dimension, dict(meta or {}))


def s_shape_stats(curve: ErrorCurve):
    """Increments of the error along sampling and where they peak.

    Returns (step index of the largest increment, mean increment over the first,
    middle and last thirds).  The increment for step i is e(i-1) - e(i).
    """
    errors = np.asarray(curve.errors, dtype=np.float64)
    if errors.shape[0] < 4:
        raise InvalidArgumentError("need a curve with at least 4 points")
    inc = np.diff(errors)
    steps = np.asarray(curve.step_indices)[:-1]
    thirds = np.array_split(inc, 3)
    argmax = int(steps[int(np.argmax(inc))])
    return argmax, float(thirds[0].mean()), float(thirds[1].mean()), float(thirds[2].mean())


def final_state_error(finals, gt_finals, norm="l2", per_dimension=False):
    """Mean over samples of the final-state error: l1 -> mean |r|_1, l2 -> mean |r|_2^2 (MSE)."""
    finals = np.atleast_2d(np.asarray(finals, dtype=np.float64))
    gt_finals = np.atleast_2d(np.asarray(gt_finals, dtype=np.float64))
    if finals.shape[0] == 0:
        raise InvalidArgumentError("empty batch")
    if finals.shape != gt_finals.shape:
        raise InvalidArgumentError(f"shape mismatch {finals.shape} vs {gt_finals.shape}")
    if norm == "l1":
        return float(np.mean(distance(finals, gt_finals, "l1", per_dimension)))
    if norm == "l2":
        r = finals - gt_finals
        sq = np.sum(r * r, axis=-1)
        if per_dimension:
            sq = sq / r.shape[-1]
        return float(np.mean(sq))
    raise InvalidArgumentError(f"norm must be l1 or l2, got {norm!r}")


def mean_final_distance(finals, gt_finals, norm="l2"):
    """Mean of per-sample distances |x_0 - x_0^gt|; the headline error figure."""
    return float(np.mean(distance(np.atleast_2d(finals), np.atleast_2d(gt_finals), norm)))

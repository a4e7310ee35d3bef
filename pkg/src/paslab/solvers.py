"""PF-ODE steppers (Euler/DDIM, iPNDM, Heun), trajectory recording and teachers.

Under the EDM parameterisation the ODE is dx/dt = eps(x, t), so every solver
here is a rule ``x_{i-1} = phi(x_i, d_i, t_i, t_{i-1})`` with ``d_i = eps(x_i, t_i)``.
States may carry a leading batch axis; all arithmetic is elementwise over it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from paslab.errors import InvalidArgumentError
from paslab.scorefield import noise_prediction
from paslab.timegrid import TimeSchedule, refine_for_teacher

# Adams-Bashforth weights, newest direction first.
IPNDM_COEFFICIENTS = {
    1: (1.0,),
    2: (3 / 2, -1 / 2),
    3: (23 / 12, -16 / 12, 5 / 12),
    4: (55 / 24, -59 / 24, 37 / 24, -9 / 24),
}

SOLVER_KINDS = ("euler", "ipndm", "heun")


@dataclass(frozen=True)
class SolverSpec:
    kind: str = "euler"
    order: Optional[int] = None

    def __post_init__(self):
        if self.kind not in SOLVER_KINDS:
            raise InvalidArgumentError(f"unknown solver kind {self.kind!r}; choose from {SOLVER_KINDS}")
        if self.kind == "ipndm":
            if self.order not in IPNDM_COEFFICIENTS:
                raise InvalidArgumentError(f"ipndm order must be 1..4, got {self.order!r}")
        elif self.order is not None:
            raise InvalidArgumentError(f"order only applies to ipndm, not {self.kind}")

    @classmethod
    def ipndm(cls, order=3):
        return cls("ipndm", order)

    def to_dict(self):
        return {"kind": self.kind, "order": self.order}

    @property
    def is_affine(self) -> bool:
        """Whether one step is affine in the current direction (true for euler and ipndm)."""
        return self.kind != "heun"


class HistoryBuffer:
    """The buffer Q: the initial noise followed by every direction used so far.

    Rows feed both the PCA basis extraction and the multistep combinations,
    so a corrected direction pushed here is seen by both.
    """

    def __init__(self, origin):
        self.origin = np.asarray(origin, dtype=np.float64)
        self.directions: list = []

    def push(self, d):
        d = np.asarray(d, dtype=np.float64)
        if d.shape != self.origin.shape:
            raise InvalidArgumentError(f"direction shape {d.shape} != buffer shape {self.origin.shape}")
        self.directions.append(d)

    def rows(self) -> np.ndarray:
        return np.stack([self.origin, *self.directions])

    def recent(self, count):
        """Up to ``count`` most recent directions, newest first."""
        return self.directions[::-1][:count]

    def select(self, index) -> "HistoryBuffer":
        """Per-sample view of a batched buffer."""
        out = HistoryBuffer(self.origin[index])
        out.directions = [d[index] for d in self.directions]
        return out

    def copy(self) -> "HistoryBuffer":
        out = HistoryBuffer(self.origin)
        out.directions = list(self.directions)
        return out

    def __len__(self):
        return len(self.directions)


@dataclass
class TrajectoryRecord:
    """States ``states[i] = x_{t_i}`` (i = 0..N) and ``directions[i-1] = d_{t_i}``."""

    schedule: TimeSchedule
    states: np.ndarray
    directions: np.ndarray
    buffer: Optional[HistoryBuffer] = field(default=None, repr=False)
    corrected_steps: tuple = ()

    def state(self, i):
        return self.states[i]

    def direction(self, i):
        if not 1 <= i <= self.schedule.n_steps:
            raise IndexError(f"no direction at step {i}")
        return self.directions[i - 1]

    @property
    def final(self):
        return self.states[0]

    @property
    def x_T(self):
        return self.states[self.schedule.n_steps]


def _check_pair(x, d):
    x = np.asarray(x, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    if x.shape != d.shape:
        raise InvalidArgumentError(f"state shape {x.shape} and direction shape {d.shape} differ")
    return x, d


def _check_times(t_i, t_prev):
    if not t_prev < t_i:
        raise InvalidArgumentError(f"steps run backwards in time: need t_prev < t_i, got {t_prev} >= {t_i}")


def euler_step(x, d, t_i, t_prev):
    _check_times(t_i, t_prev)
    x, d = _check_pair(x, d)
    return x + (t_prev - t_i) * d


def ipndm_coefficients(order, available):
    """Weights for the effective order min(order, available + 1)."""
    return IPNDM_COEFFICIENTS[min(order, available + 1)]


def ipndm_affine(d_shape_ref, history, order, t_i, t_prev):
    """Split an iPNDM step into ``base + s * d``; returns (offset, s) with offset = base - x."""
    coeffs = ipndm_coefficients(order, len(history) if history is not None else 0)
    h = t_prev - t_i
    offset = np.zeros_like(d_shape_ref)
    if len(coeffs) > 1:
        combo = 0.0
        for b, past in zip(coeffs[1:], history.recent(len(coeffs) - 1)):
            if past.shape != d_shape_ref.shape:
                raise InvalidArgumentError("history direction shape mismatch")
            combo = combo + b * past
        offset = h * combo
    return offset, h * coeffs[0]


def ipndm_step(x, d, history, order, t_i, t_prev, return_sensitivity=False):
    """Fixed-coefficient Adams-Bashforth step over the buffered directions.

    With ``return_sensitivity`` also returns ``s = (t_prev - t_i) * b_0``, the
    derivative of the output with respect to ``d``.
    """
    _check_times(t_i, t_prev)
    x, d = _check_pair(x, d)
    if order not in IPNDM_COEFFICIENTS:
        raise InvalidArgumentError(f"ipndm order must be 1..4, got {order!r}")
    coeffs = ipndm_coefficients(order, len(history) if history is not None else 0)
    combo = coeffs[0] * d
    for b, past in zip(coeffs[1:], history.recent(len(coeffs) - 1) if len(coeffs) > 1 else ()):
        if past.shape != d.shape:
            raise InvalidArgumentError("history direction shape mismatch")
        combo = combo + b * past
    out = x + (t_prev - t_i) * combo
    if return_sensitivity:
        return out, (t_prev - t_i) * coeffs[0]
    return out


def heun_step(model, x, t_i, t_prev, d=None):
    """EDM's second-order step; ``d`` defaults to eps(x, t_i)."""
    _check_times(t_i, t_prev)
    x = np.asarray(x, dtype=np.float64)
    if d is None:
        d = noise_prediction(model, x, t_i)
    x, d = _check_pair(x, d)
    h = t_prev - t_i
    x_pred = x + h * d
    d_pred = noise_prediction(model, x_pred, t_prev)
    return x + h * (0.5 * d + 0.5 * d_pred)


def solver_step(model, spec: SolverSpec, x, d, history, t_i, t_prev):
    """phi(x, d, t_i, t_prev) for any supported solver."""
    if spec.kind == "euler":
        return euler_step(x, d, t_i, t_prev)
    if spec.kind == "ipndm":
        return ipndm_step(x, d, history, spec.order, t_i, t_prev)
    return heun_step(model, x, t_i, t_prev, d=d)


def affine_parts(spec: SolverSpec, x, history, t_i, t_prev):
    """For affine solvers, (base, s) with ``phi(x, d) = base + s * d``."""
    if spec.kind == "euler":
        return np.asarray(x, dtype=np.float64), t_prev - t_i
    if spec.kind == "ipndm":
        x = np.asarray(x, dtype=np.float64)
        offset, s = ipndm_affine(x, history, spec.order, t_i, t_prev)
        return x + offset, s
    raise InvalidArgumentError("heun is not affine in the direction; use finite differences")


DirectionHook = Callable[[int, np.ndarray, np.ndarray, HistoryBuffer], np.ndarray]


def sample(model, spec: SolverSpec, schedule: TimeSchedule, x_T, direction_hook: Optional[DirectionHook] = None):
    """Run the solver from ``x_T`` at ``t_N`` down to ``t_0``, recording everything.

    ``direction_hook(i, x, d, buffer)`` may replace d before the step; the
    returned direction is what the solver uses and what enters the buffer.
    """
    x = np.asarray(x_T, dtype=np.float64)
    if x.shape[-1] != model.dimension:
        raise InvalidArgumentError(f"x_T last axis {x.shape[-1]} != model dimension {model.dimension}")
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("x_T must be finite")
    n = schedule.n_steps
    times = schedule.times
    states = np.empty((n + 1,) + x.shape)
    directions = np.empty((n,) + x.shape)
    buffer = HistoryBuffer(x)
    states[n] = x
    corrected = []
    d = noise_prediction(model, x, times[n])
    for i in range(n, 0, -1):
        t_i, t_prev = times[i], times[i - 1]
        if direction_hook is not None:
            new_d = direction_hook(i, x, d, buffer)
            if new_d is not d:
                corrected.append(i)
            d = new_d
        x = solver_step(model, spec, x, d, buffer, t_i, t_prev)
        directions[i - 1] = d
        buffer.push(d)
        states[i - 1] = x
        if i > 1:
            d = noise_prediction(model, x, t_prev)
    return TrajectoryRecord(schedule, states, directions, buffer, tuple(corrected))


def generate_ground_truth(model, student: TimeSchedule, x_T, n_prime, teacher_kind="heun"):
    """Teacher states on the student grid: ``gt[i] = x^gt_{t_i}`` for i = 0..N.

    ``n_prime`` counts teacher steps; a Heun teacher costs two evaluations per step.
    """
    if teacher_kind not in ("euler", "heun"):
        raise InvalidArgumentError(f"teacher must be euler or heun, got {teacher_kind!r}")
    refinement = refine_for_teacher(student, n_prime)
    teacher = sample(model, SolverSpec(teacher_kind), refinement.teacher, x_T)
    return teacher.states[refinement.index_map]

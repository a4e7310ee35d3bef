"""Polynomial (rho) time schedules and nested teacher refinements.

Times are stored ascending by index, ``times[0] = t_min`` and
``times[N] = t_max``; samplers walk the grid from index N down to 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from paslab.errors import InvalidArgumentError

DEFAULT_RHO = 7.0
DEFAULT_T_MIN = 0.002
DEFAULT_T_MAX = 80.0


@dataclass(frozen=True)
class TimeSchedule:
    rho: float
    t_min: float
    t_max: float
    n_steps: int
    times: np.ndarray

    def __post_init__(self):
        self.times.setflags(write=False)

    def __len__(self):
        return self.n_steps + 1

    def params(self) -> dict:
        return {"rho": self.rho, "t_min": self.t_min, "t_max": self.t_max, "n": self.n_steps}

    def to_csv(self) -> str:
        lines = ["index,time"]
        lines += [f"{i},{t!r}" for i, t in enumerate(self.times.tolist())]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class TeacherRefinement:
    m_inserted: int
    teacher: TimeSchedule
    index_map: np.ndarray  # student index i -> teacher index i * (M + 1)


def _check_positive_finite(name, value):
    if not (isinstance(value, (int, float, np.floating, np.integer)) and math.isfinite(value) and value > 0):
        raise InvalidArgumentError(f"{name} must be finite and > 0, got {value!r}")


def build_schedule(rho: float = DEFAULT_RHO, t_min: float = DEFAULT_T_MIN,
                   t_max: float = DEFAULT_T_MAX, n_steps: int = 10) -> TimeSchedule:
    """Polynomial schedule ``t_i = (t_min^(1/rho) + i/N (t_max^(1/rho) - t_min^(1/rho)))^rho``.

    ``i / N`` is a correctly rounded division of integers, so a refined grid
    with ``N(M+1)`` steps reproduces every student time bit-for-bit at index
    ``i(M+1)``.
    """
    _check_positive_finite("rho", rho)
    _check_positive_finite("t_min", t_min)
    _check_positive_finite("t_max", t_max)
    if isinstance(n_steps, bool) or not isinstance(n_steps, (int, np.integer)) or n_steps < 1:
        raise InvalidArgumentError(f"n_steps must be an integer >= 1, got {n_steps!r}")
    if not t_max > t_min:
        raise InvalidArgumentError(f"t_max ({t_max}) must exceed t_min ({t_min})")
    rho, t_min, t_max, n_steps = float(rho), float(t_min), float(t_max), int(n_steps)

    # extended precision keeps the rho-th power within a few ulp of the exact value
    wide = np.longdouble
    inv_rho = wide(1) / wide(rho)
    lo = wide(t_min) ** inv_rho
    hi = wide(t_max) ** inv_rho
    frac = np.arange(n_steps + 1, dtype=wide) / wide(n_steps)
    times = ((lo + frac * (hi - lo)) ** wide(rho)).astype(np.float64)
    times[0] = t_min
    times[-1] = t_max
    if not np.all(np.diff(times) > 0):
        raise InvalidArgumentError("schedule is not strictly increasing; parameters are degenerate")
    return TimeSchedule(rho, t_min, t_max, n_steps, times)


def refine_for_teacher(student: TimeSchedule, n_prime: int) -> TeacherRefinement:
    """Insert M points per student interval, M the smallest with N(M+1) >= n_prime."""
    n = student.n_steps
    if n_prime < n:
        raise InvalidArgumentError(f"teacher resolution {n_prime} is below student steps {n}")
    m = -(-int(n_prime) // n) - 1
    teacher = build_schedule(student.rho, student.t_min, student.t_max, n * (m + 1))
    index_map = np.arange(n + 1) * (m + 1)
    return TeacherRefinement(m, teacher, index_map)

"""Coordinate training with adaptive step selection, and corrected sampling.

At each step i the direction d is re-expressed in a per-sample basis U
(first vector d/|d|) and replaced by ``U^T C`` where C is a handful of
coordinates shared by every sample.  Training walks the steps N..1 once,
keeps a correction only where it lowers the batch loss by more than tau, and
stores the kept coordinate vectors in a :class:`CorrectionTable`.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from paslab.errors import DivergenceError, IncompatibleTableError, InvalidArgumentError
from paslab.metrics import LOSS_KINDS, PSEUDO_HUBER_C, sample_loss, sample_loss_grad
from paslab.scorefield import noise_prediction
from paslab.solvers import HistoryBuffer, SolverSpec, affine_parts, generate_ground_truth, sample, solver_step
from paslab.subspace import pca_basis
from paslab.timegrid import TimeSchedule

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
PARAMETERIZATIONS = ("absolute", "relative")


@dataclass
class TrainConfig:
    learning_rate: float = 1e-2
    loss: str = "l1"
    pseudo_huber_c: float = PSEUDO_HUBER_C
    tau: float = 1e-4  # threshold for the first accepted correction
    tau_after: float = 1e-4  # threshold once a correction has been accepted
    inner_iterations: int = 100
    batch_size: Optional[int] = None  # None: full batch every iteration
    trajectory_count: int = 512
    basis_size: int = 4
    teacher_steps: int = 100
    teacher_kind: str = "heun"
    parameterization: str = "absolute"
    seed: int = 0

    def __post_init__(self):
        if self.loss not in LOSS_KINDS:
            raise InvalidArgumentError(f"loss must be one of {LOSS_KINDS}, got {self.loss!r}")
        if self.parameterization not in PARAMETERIZATIONS:
            raise InvalidArgumentError(f"parameterization must be one of {PARAMETERIZATIONS}")
        if not self.learning_rate > 0 or not math.isfinite(self.learning_rate):
            raise InvalidArgumentError("learning_rate must be finite and > 0")
        if not (self.tau >= 0 and self.tau_after >= 0):
            raise InvalidArgumentError("tau must be >= 0")
        if self.inner_iterations < 0:
            raise InvalidArgumentError("inner_iterations must be >= 0")
        if self.batch_size is not None and self.batch_size < 1:
            raise InvalidArgumentError("batch_size must be >= 1")
        if not 1 <= self.basis_size <= 4:
            raise InvalidArgumentError("basis_size must be 1..4")
        if self.pseudo_huber_c <= 0:
            raise InvalidArgumentError("pseudo_huber_c must be > 0")
        if self.teacher_kind not in ("euler", "heun"):
            raise InvalidArgumentError("teacher_kind must be euler or heun")


@dataclass(frozen=True)
class CorrectionEntry:
    step: int
    coords: np.ndarray


@dataclass
class StepLog:
    step: int
    loss_corrected: float
    loss_uncorrected: float
    tau: float
    accepted: bool
    coords: list


@dataclass
class CorrectionTable:
    entries: list
    solver: SolverSpec
    schedule: dict  # rho, t_min, t_max, n
    basis_k: int = 4
    loss: str = "l1"
    tau: float = 1e-4
    lr: float = 1e-2
    trajectories: int = 0
    seed: int = 0
    parameterization: str = "absolute"
    log: list = field(default_factory=list, compare=False, repr=False)

    def __post_init__(self):
        steps = [e.step for e in self.entries]
        if len(set(steps)) != len(steps):
            raise InvalidArgumentError("duplicate step indices in correction table")
        if any(not 1 <= s <= self.schedule["n"] for s in steps):
            raise InvalidArgumentError("step index outside 1..N")
        self.entries = sorted(self.entries, key=lambda e: -e.step)

    @property
    def steps(self):
        return [e.step for e in self.entries]

    @property
    def parameter_count(self):
        return sum(len(e.coords) for e in self.entries)

    def coords_for(self, step):
        for e in self.entries:
            if e.step == step:
                return e.coords
        return None

    def check_compatible(self, solver: SolverSpec, schedule: TimeSchedule):
        if solver != self.solver:
            raise IncompatibleTableError(f"table trained for solver {self.solver.to_dict()}, got {solver.to_dict()}")
        if schedule.params() != self.schedule:
            raise IncompatibleTableError(f"table trained for schedule {self.schedule}, got {schedule.params()}")

    def to_dict(self):
        return {
            "format_version": FORMAT_VERSION,
            "solver": self.solver.to_dict(),
            "schedule": dict(self.schedule),
            "basis_k": self.basis_k,
            "loss": self.loss,
            "tau": _encode_float(self.tau),
            "lr": _encode_float(self.lr),
            "trajectories": self.trajectories,
            "seed": self.seed,
            "parameterization": self.parameterization,
            "entries": [{"step": e.step, "coords": [float(c) for c in e.coords]} for e in self.entries],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, data):
        if data.get("format_version") != FORMAT_VERSION:
            raise InvalidArgumentError(f"unsupported table format_version {data.get('format_version')!r}")
        sched = data["schedule"]
        return cls(
            entries=[CorrectionEntry(int(e["step"]), np.asarray(e["coords"], dtype=np.float64))
                     for e in data["entries"]],
            solver=SolverSpec(data["solver"]["kind"], data["solver"].get("order")),
            schedule={"rho": float(sched["rho"]), "t_min": float(sched["t_min"]),
                      "t_max": float(sched["t_max"]), "n": int(sched["n"])},
            basis_k=int(data["basis_k"]),
            loss=data["loss"],
            tau=_decode_float(data["tau"]),
            lr=_decode_float(data["lr"]),
            trajectories=int(data["trajectories"]),
            seed=int(data["seed"]),
            parameterization=data.get("parameterization", "absolute"),
        )

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def save(self, path):
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path):
        return cls.from_json(Path(path).read_text())


def _encode_float(x):
    # strict JSON has no infinities; tau = inf is a legitimate setting
    return float(x) if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def _decode_float(x):
    return float(x)


# ---------------------------------------------------------------------------
# one step


@dataclass
class StepBatch:
    """Everything needed to evaluate one solver step for a batch of samples.

    states, directions: (B, D); bases: (B, k, D) zero-padded; history: batched
    HistoryBuffer (directions before this step), used by multistep solvers.
    """

    states: np.ndarray
    directions: np.ndarray
    bases: np.ndarray
    history: Optional[HistoryBuffer] = None
    model: object = None

    def __len__(self):
        return self.states.shape[0]


def coordinate_scale(directions, parameterization):
    """Per-sample multiplier turning shared coordinates into absolute ones."""
    if parameterization == "relative":
        return np.linalg.norm(directions, axis=-1)
    return np.ones(directions.shape[:-1])


def corrected_directions(bases, coords, scale):
    """d_b = scale_b * sum_j coords_j * U_b[j]."""
    return scale[:, None] * np.einsum("k,bkd->bd", coords, bases)


def initial_coordinates(batch: StepBatch, k, parameterization):
    coords = np.zeros(k)
    if parameterization == "relative":
        coords[0] = 1.0
    else:
        coords[0] = float(np.mean(np.linalg.norm(batch.directions, axis=-1)))
    return coords


def batch_loss(batch: StepBatch, coords, ground_truth, solver, t_i, t_prev, config: TrainConfig):
    scale = coordinate_scale(batch.directions, config.parameterization)
    d = corrected_directions(batch.bases, coords, scale)
    out = solver_step(batch.model, solver, batch.states, d, batch.history, t_i, t_prev)
    return float(np.mean(sample_loss(out - ground_truth, config.loss, config.pseudo_huber_c)))


def analytic_gradient(batch: StepBatch, coords, ground_truth, solver, t_i, t_prev, config: TrainConfig):
    """Gradient of the batch-mean loss; exact because the step is affine in d."""
    base, s = affine_parts(solver, batch.states, batch.history, t_i, t_prev)
    scale = coordinate_scale(batch.directions, config.parameterization)
    out = base + s * corrected_directions(batch.bases, coords, scale)
    g = sample_loss_grad(out - ground_truth, config.loss, config.pseudo_huber_c)
    per_sample = np.einsum("bkd,bd->bk", batch.bases, g) * (s * scale)[:, None]
    return per_sample.mean(axis=0)


def finite_difference_gradient(batch, coords, ground_truth, solver, t_i, t_prev, config, rel_step=1e-6):
    """Central differences of :func:`batch_loss`; works for any solver."""
    coords = np.asarray(coords, dtype=np.float64)
    grad = np.zeros_like(coords)
    for j in range(coords.shape[0]):
        h = rel_step * max(1.0, abs(coords[j]))
        up, down = coords.copy(), coords.copy()
        up[j] += h
        down[j] -= h
        grad[j] = (batch_loss(batch, up, ground_truth, solver, t_i, t_prev, config)
                   - batch_loss(batch, down, ground_truth, solver, t_i, t_prev, config)) / (2 * h)
    return grad


def optimize_coordinates(batch: StepBatch, ground_truth, solver: SolverSpec, t_i, t_prev,
                         config: TrainConfig, init=None, gradient="auto"):
    """Plain gradient descent on the shared coordinates.

    Runs ``config.inner_iterations`` steps with a fixed learning rate; each
    step uses the next mini-batch in a fixed cyclic order.  ``gradient`` is
    "analytic", "fd" or "auto" (analytic whenever the solver is affine).
    """
    if len(batch) == 0:
        raise InvalidArgumentError("empty batch")
    ground_truth = np.asarray(ground_truth, dtype=np.float64)
    k = batch.bases.shape[1]
    coords = initial_coordinates(batch, k, config.parameterization) if init is None \
        else np.array(init, dtype=np.float64)
    if gradient == "auto":
        gradient = "analytic" if solver.is_affine else "fd"
    grad_fn = analytic_gradient if gradient == "analytic" else finite_difference_gradient

    n = len(batch)
    size = n if config.batch_size is None else min(config.batch_size, n)
    starts = list(range(0, n, size))
    for it in range(config.inner_iterations):
        start = starts[it % len(starts)]
        sl = slice(start, start + size)
        sub = batch if size == n else _slice_batch(batch, sl)
        gt = ground_truth if size == n else ground_truth[sl]
        grad = grad_fn(sub, coords, gt, solver, t_i, t_prev, config)
        coords = coords - config.learning_rate * grad
        if not np.all(np.isfinite(coords)):
            raise DivergenceError(f"coordinates became non-finite at iteration {it}", iteration=it)
    loss = batch_loss(batch, coords, ground_truth, solver, t_i, t_prev, config)
    if not math.isfinite(loss):
        raise DivergenceError(f"loss is non-finite after {config.inner_iterations} iterations",
                              iteration=config.inner_iterations)
    return coords


def _slice_batch(batch: StepBatch, sl):
    hist = None
    if batch.history is not None:
        hist = HistoryBuffer(batch.history.origin[sl])
        hist.directions = [d[sl] for d in batch.history.directions]
    return StepBatch(batch.states[sl], batch.directions[sl], batch.bases[sl], hist, batch.model)


def adaptive_accept(loss_corrected, loss_uncorrected, tau) -> bool:
    """Keep a correction only if it beats the uncorrected loss by more than tau."""
    return bool(loss_uncorrected - (loss_corrected + tau) > 0)


# ---------------------------------------------------------------------------
# full passes


def batch_bases(buffer: HistoryBuffer, directions, k):
    """Per-sample PCA bases for a batched buffer, zero-padded to (B, k, D)."""
    return np.stack([pca_basis(buffer.select(b), directions[b], k).padded(k)
                     for b in range(directions.shape[0])])


def train_pas(model, solver: SolverSpec, schedule: TimeSchedule, initial_noises, config: TrainConfig,
              ground_truth=None) -> CorrectionTable:
    """Learn the correction table from teacher trajectories started at ``initial_noises``.

    ``ground_truth`` (shape (N+1, B, D), indexed by step) is generated with the
    configured teacher when omitted.
    """
    x = np.atleast_2d(np.asarray(initial_noises, dtype=np.float64))
    if x.shape[0] == 0:
        raise InvalidArgumentError("need at least one initial noise")
    if ground_truth is None:
        ground_truth = generate_ground_truth(model, schedule, x, config.teacher_steps, config.teacher_kind)
    n, k, times = schedule.n_steps, config.basis_size, schedule.times

    buffer = HistoryBuffer(x)
    d = noise_prediction(model, x, times[n])
    tau = config.tau
    entries, steplog = [], []
    for i in range(n, 0, -1):
        t_i, t_prev = times[i], times[i - 1]
        gt = ground_truth[i - 1]
        batch = StepBatch(x, d, batch_bases(buffer, d, k), buffer, model)

        x_plain = solver_step(model, solver, x, d, buffer, t_i, t_prev)
        loss_plain = float(np.mean(sample_loss(x_plain - gt, config.loss, config.pseudo_huber_c)))
        try:
            coords = optimize_coordinates(batch, gt, solver, t_i, t_prev, config)
        except DivergenceError as exc:
            raise DivergenceError(f"step {i}: {exc}", step=i, iteration=exc.iteration) from exc
        d_corr = corrected_directions(batch.bases, coords, coordinate_scale(d, config.parameterization))
        x_corr = solver_step(model, solver, x, d_corr, buffer, t_i, t_prev)
        loss_corr = float(np.mean(sample_loss(x_corr - gt, config.loss, config.pseudo_huber_c)))

        accepted = adaptive_accept(loss_corr, loss_plain, tau)
        steplog.append(StepLog(i, loss_corr, loss_plain, tau, accepted, coords.tolist()))
        log.info("step %d: corrected %.6g uncorrected %.6g tau %.1e -> %s",
                 i, loss_corr, loss_plain, tau, "keep" if accepted else "skip")
        if accepted:
            entries.append(CorrectionEntry(i, coords))
            x, d = x_corr, d_corr
            tau = config.tau_after
        else:
            x = x_plain
        buffer.push(d)
        if i > 1:
            d = noise_prediction(model, x, t_prev)

    return CorrectionTable(
        entries=entries, solver=solver, schedule=schedule.params(), basis_k=k, loss=config.loss,
        tau=config.tau, lr=config.learning_rate, trajectories=x.shape[0], seed=config.seed,
        parameterization=config.parameterization, log=steplog,
    )


def sample_with_correction(model, solver: SolverSpec, schedule: TimeSchedule, x_T, table: CorrectionTable):
    """Sample with the stored corrections applied; an empty table reproduces ``sample`` exactly."""
    table.check_compatible(solver, schedule)
    k = table.basis_k

    def hook(i, x, d, buffer):
        coords = table.coords_for(i)
        if coords is None:
            return d
        if d.ndim == 1:
            bases = pca_basis(buffer, d, k).padded(k)[None]
            return corrected_directions(bases, coords, coordinate_scale(d[None], table.parameterization))[0]
        bases = batch_bases(buffer, d, k)
        return corrected_directions(bases, coords, coordinate_scale(d, table.parameterization))

    return sample(model, solver, schedule, x_T, direction_hook=hook)


def config_dict(config: TrainConfig) -> dict:
    return asdict(config)

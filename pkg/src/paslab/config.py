"""Experiment configuration (JSON) and the seeded noise streams.

Example::

    {
      "model": {"preset": "rank2-manifold", "seed": 0, "dim": 64},
      "solver": {"kind": "euler"},
      "schedule": {"rho": 7, "t_min": 0.002, "t_max": 80, "n": 10},
      "train": {"learning_rate": 0.01, "loss": "l1", "tau": 0.0001},
      "eval": {"samples": 512},
      "output_dir": "runs/headline",
      "seed": 0
    }

Unknown keys are rejected at every level.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from paslab.errors import InvalidArgumentError
from paslab.pas import TrainConfig
from paslab.scorefield import PRESETS, build_preset, load_model
from paslab.solvers import SolverSpec
from paslab.timegrid import build_schedule

# stream ids for per-sample noise; training and evaluation never overlap
TRAIN_STREAM = 0
EVAL_STREAM = 1


class ConfigError(InvalidArgumentError):
    pass


@dataclass
class ModelConfig:
    preset: Optional[str] = "rank2-manifold"
    seed: int = 0
    dim: Optional[int] = None
    path: Optional[str] = None
    options: dict = field(default_factory=dict)  # extra preset keyword arguments


@dataclass
class ScheduleConfig:
    rho: float = 7.0
    t_min: float = 0.002
    t_max: float = 80.0
    n: int = 10


@dataclass
class EvalConfig:
    samples: int = 512
    norm: str = "l2"
    per_dimension: bool = False
    teacher_steps: int = 100
    teacher_kind: str = "heun"
    dump_trajectories: int = 0
    dump_format: str = "csv"
    subspace_trajectories: int = 100
    subspace_points: int = 100
    max_components: int = 10


@dataclass
class ExperimentConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    solver: dict = field(default_factory=lambda: {"kind": "euler"})
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    output_dir: str = "runs/default"
    seed: int = 0

    # ---- derived objects
    def solver_spec(self) -> SolverSpec:
        return SolverSpec(self.solver.get("kind", "euler"), self.solver.get("order"))

    def build_schedule(self):
        s = self.schedule
        return build_schedule(s.rho, s.t_min, s.t_max, s.n)

    def build_model(self):
        m = self.model
        if m.path:
            return load_model(m.path)
        kwargs = dict(m.options)
        if m.dim is not None:
            kwargs["dim"] = m.dim
        return build_preset(m.preset, seed=m.seed, **kwargs)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def canonical_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    return obj


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {unknown}; allowed: {sorted(names)}")
    kwargs = {}
    for key, value in data.items():
        f = names[key]
        nested = NESTED.get((cls, key))
        if nested is not None:
            kwargs[key] = _build(nested, value, f"{where}.{key}")
        else:
            kwargs[key] = _coerce(value, f.type, f"{where}.{key}")
    try:
        return cls(**kwargs)
    except InvalidArgumentError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _coerce(value, type_name, where):
    t = str(type_name)
    if t in ("float", "Optional[float]"):
        if value == "inf":
            return math.inf
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if t in ("int", "Optional[int]"):
        if value is None and t.startswith("Optional"):
            return None
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if t == "bool" and not isinstance(value, bool):
        raise ConfigError(f"{where}: expected true/false, got {value!r}")
    if t == "str" and not isinstance(value, str):
        raise ConfigError(f"{where}: expected a string, got {value!r}")
    return value


NESTED = {
    (ExperimentConfig, "model"): ModelConfig,
    (ExperimentConfig, "schedule"): ScheduleConfig,
    (ExperimentConfig, "train"): TrainConfig,
    (ExperimentConfig, "eval"): EvalConfig,
}


def parse_config(data: dict) -> ExperimentConfig:
    """Validate a config mapping, raising ConfigError with the offending field path."""
    cfg = _build(ExperimentConfig, data, "config")
    if not isinstance(cfg.solver, dict) or set(cfg.solver) - {"kind", "order"}:
        raise ConfigError(f"config.solver: expected {{kind, order}}, got {cfg.solver!r}")
    try:
        cfg.solver_spec()
    except InvalidArgumentError as exc:
        raise ConfigError(f"config.solver: {exc}") from exc
    try:
        cfg.build_schedule()
    except InvalidArgumentError as exc:
        raise ConfigError(f"config.schedule: {exc}") from exc
    m = cfg.model
    if m.path is None and m.preset not in PRESETS:
        raise ConfigError(f"config.model.preset: unknown preset {m.preset!r}; choose from {sorted(PRESETS)}")
    e = cfg.eval
    if e.samples < 1:
        raise ConfigError("config.eval.samples: must be >= 1")
    if e.norm not in ("l1", "l2"):
        raise ConfigError("config.eval.norm: must be l1 or l2")
    if e.teacher_kind not in ("euler", "heun"):
        raise ConfigError("config.eval.teacher_kind: must be euler or heun")
    if e.teacher_steps < cfg.schedule.n:
        raise ConfigError("config.eval.teacher_steps: must be >= schedule.n")
    if cfg.train.teacher_steps < cfg.schedule.n:
        raise ConfigError("config.train.teacher_steps: must be >= schedule.n")
    if e.dump_format not in ("csv", "binary"):
        raise ConfigError("config.eval.dump_format: must be csv or binary")
    if e.subspace_points < 2 or e.subspace_trajectories < 1:
        raise ConfigError("config.eval: subspace_points must be >= 2 and subspace_trajectories >= 1")
    if not isinstance(cfg.seed, int) or cfg.seed < 0:
        raise ConfigError("config.seed: must be a non-negative integer")
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return parse_config(data)


def sample_rng(seed, stream, index) -> np.random.Generator:
    """Independent generator for sample ``index`` of ``stream``; batch layout cannot change it."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, index)))


def initial_noises(seed, stream, count, dim, t_max):
    """x_T = t_max * z, z ~ N(0, I), one seeded stream per sample."""
    return np.stack([t_max * sample_rng(seed, stream, i).standard_normal(dim) for i in range(count)])

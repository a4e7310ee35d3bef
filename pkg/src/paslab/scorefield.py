"""Analytic score fields under the EDM convention (alpha_t = 1, sigma_t = t).

The noised marginal of a component N(mu, Sigma) is N(mu, Sigma + t^2 I).  Each
covariance is held as eigenpairs so that (Sigma + t^2 I)^-1 acts as a scalar
per eigen-direction; directions not listed have eigenvalue zero.

All evaluation functions accept a single point of shape (D,) or a batch of
shape (..., D).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from paslab.errors import InvalidArgumentError, UnsupportedModelError

RANK_FLOOR = 1e-4


@dataclass(frozen=True)
class GaussianComponent:
    weight: float
    mean: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # (D, K), columns orthonormal

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        vals = np.asarray(self.eigenvalues, dtype=np.float64).reshape(-1)
        vecs = np.asarray(self.eigenvectors, dtype=np.float64)
        if vecs.ndim == 1:
            vecs = vecs[:, None]
        if mean.ndim != 1:
            raise InvalidArgumentError("mean must be a vector")
        if vecs.shape != (mean.shape[0], vals.shape[0]):
            raise InvalidArgumentError(
                f"eigenvectors shape {vecs.shape} inconsistent with D={mean.shape[0]}, K={vals.shape[0]}")
        if not 0.0 < self.weight <= 1.0:
            raise InvalidArgumentError(f"weight must lie in (0, 1], got {self.weight}")
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise InvalidArgumentError("eigenvalues must be finite and >= 0")
        gram = vecs.T @ vecs
        if not np.allclose(gram, np.eye(vals.shape[0]), rtol=0.0, atol=1e-10):
            raise InvalidArgumentError("eigenvectors must be orthonormal")
        for name, arr in (("mean", mean), ("eigenvalues", vals), ("eigenvectors", vecs)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dimension(self) -> int:
        return self.mean.shape[0]

    @property
    def full_rank_listed(self) -> bool:
        return self.eigenvalues.shape[0] == self.dimension

    def _split(self, x):
        """Residual r = x - mu as eigen-coordinates plus the unlisted remainder."""
        r = x - self.mean
        coords = r @ self.eigenvectors
        rest = None if self.full_rank_listed else r - coords @ self.eigenvectors.T
        return coords, rest

    def log_density(self, x, t):
        coords, rest = self._split(x)
        var = self.eigenvalues + t * t
        quad = np.sum(coords ** 2 / var, axis=-1)
        logdet = np.sum(np.log(var))
        n_rest = self.dimension - self.eigenvalues.shape[0]
        if rest is not None:
            quad = quad + np.sum(rest ** 2, axis=-1) / (t * t)
            logdet = logdet + n_rest * math.log(t * t)
        return -0.5 * (quad + logdet + self.dimension * math.log(2 * math.pi))

    def score(self, x, t):
        coords, rest = self._split(x)
        out = -(coords / (self.eigenvalues + t * t)) @ self.eigenvectors.T
        if rest is not None:
            out = out - rest / (t * t)
        return out


@dataclass(frozen=True)
class GaussianMixtureScoreModel:
    components: tuple
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise InvalidArgumentError("a model needs at least one component")
        dims = {c.dimension for c in comps}
        if len(dims) != 1:
            raise InvalidArgumentError(f"components disagree on dimension: {sorted(dims)}")
        total = sum(c.weight for c in comps)
        if abs(total - 1.0) > 1e-12:
            raise InvalidArgumentError(f"component weights sum to {total!r}, expected 1")
        object.__setattr__(self, "components", comps)

    @property
    def dimension(self) -> int:
        return self.components[0].dimension

    @property
    def is_single_gaussian(self) -> bool:
        return len(self.components) == 1

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "components": [
                {
                    "weight": c.weight,
                    "mean": c.mean.tolist(),
                    "eigenvalues": c.eigenvalues.tolist(),
                    "eigenvectors": c.eigenvectors.T.tolist(),
                }
                for c in self.components
            ],
        }

    @classmethod
    def from_dict(cls, spec: dict, name="custom") -> "GaussianMixtureScoreModel":
        dim = int(spec["dimension"])
        comps = []
        for c in spec["components"]:
            vecs = np.asarray(c["eigenvectors"], dtype=np.float64).reshape(-1, dim).T
            comps.append(GaussianComponent(float(c["weight"]), np.asarray(c["mean"], dtype=np.float64),
                                           np.asarray(c["eigenvalues"], dtype=np.float64), vecs))
        model = cls(tuple(comps), name=name)
        if model.dimension != dim:
            raise InvalidArgumentError(f"declared dimension {dim} but components have {model.dimension}")
        return model


def _check_time(t):
    if not (np.isfinite(t) and t > 0):
        raise InvalidArgumentError(f"time must be finite and > 0, got {t!r}")


def _as_points(model, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.dimension:
        raise InvalidArgumentError(f"expected last axis {model.dimension}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("x must be finite")
    return x


def log_density(model: GaussianMixtureScoreModel, x, t):
    """log q_t(x) of the noised mixture."""
    _check_time(t)
    x = _as_points(model, x)
    parts = np.stack([math.log(c.weight) + c.log_density(x, t) for c in model.components], axis=-1)
    return logsumexp(parts, axis=-1)


def score(model: GaussianMixtureScoreModel, x, t):
    """grad_x log q_t(x), with posterior component weights formed in log space."""
    _check_time(t)
    x = _as_points(model, x)
    if model.is_single_gaussian:
        return model.components[0].score(x, t)
    logw = np.stack([math.log(c.weight) + c.log_density(x, t) for c in model.components], axis=-1)
    post = np.exp(logw - logsumexp(logw, axis=-1, keepdims=True))
    out = np.zeros_like(x)
    for m, c in enumerate(model.components):
        out = out + post[..., m:m + 1] * c.score(x, t)
    return out


def noise_prediction(model, x, t):
    """epsilon(x, t) = -t * score; also the PF-ODE velocity dx/dt."""
    return -t * score(model, x, t)


def data_prediction(model, x, t):
    """Denoised estimate x + t^2 * score."""
    x = np.asarray(x, dtype=np.float64)
    return x + (t * t) * score(model, x, t)


def exact_trajectory(model, x_T, t, T):
    """Closed-form PF-ODE solution for a single Gaussian, started at (x_T, T).

    Along eigen-direction u_k the residual scales by sqrt((lam_k + t^2) / (lam_k + T^2));
    unlisted (lam = 0) directions scale by t / T.
    """
    if not model.is_single_gaussian:
        raise UnsupportedModelError("exact_trajectory needs a single-Gaussian model")
    if not (0 < t <= T):
        raise InvalidArgumentError(f"need 0 < t <= T, got t={t}, T={T}")
    comp = model.components[0]
    x_T = _as_points(model, x_T)
    if t == T:
        return x_T.copy()
    coords, rest = comp._split(x_T)
    ratio = np.sqrt((comp.eigenvalues + t * t) / (comp.eigenvalues + T * T))
    out = comp.mean + (coords * ratio) @ comp.eigenvectors.T
    if rest is not None:
        out = out + (t / T) * rest
    return out


def exact_trajectory_derivative(model, x_T, t, T):
    """d/dt of :func:`exact_trajectory`; used only as an independent check."""
    comp = model.components[0]
    coords, rest = comp._split(np.asarray(x_T, dtype=np.float64))
    lam = comp.eigenvalues
    dratio = t / np.sqrt((lam + t * t) * (lam + T * T))
    out = (coords * dratio) @ comp.eigenvectors.T
    if rest is not None:
        out = out + rest / T
    return out


# ---------------------------------------------------------------------------
# presets


def random_orthonormal(dim, rng):
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


def isotropic(dim=2, variance=1.0, mean=None):
    mean = np.zeros(dim) if mean is None else np.asarray(mean, dtype=np.float64)
    comp = GaussianComponent(1.0, mean, np.full(dim, float(variance)), np.eye(dim))
    return GaussianMixtureScoreModel((comp,), name="isotropic")


def rank_manifold(dim=64, eigenvalues=(25.0, 9.0), floor=RANK_FLOOR, mean_scale=1.0, seed=0):
    """Single Gaussian with a few large eigenvalues and a small floor elsewhere."""
    rng = np.random.default_rng(seed)
    basis = random_orthonormal(dim, rng)
    lam = np.full(dim, float(floor))
    lam[: len(eigenvalues)] = eigenvalues
    mean = mean_scale * rng.standard_normal(dim)
    comp = GaussianComponent(1.0, mean, lam, basis)
    return GaussianMixtureScoreModel((comp,), name=f"rank{len(eigenvalues)}-manifold")


def mixture_symmetric(dim=16, separation=6.0, eigenvalues=(4.0, 1.0), floor=RANK_FLOOR, seed=0):
    """Two equal-weight components at +/- mu sharing one covariance."""
    rng = np.random.default_rng(seed)
    basis = random_orthonormal(dim, rng)
    lam = np.full(dim, float(floor))
    lam[: len(eigenvalues)] = eigenvalues
    direction = rng.standard_normal(dim)
    mu = separation * direction / np.linalg.norm(direction)
    comps = tuple(GaussianComponent(0.5, s * mu, lam, basis) for s in (1.0, -1.0))
    return GaussianMixtureScoreModel(comps, name="mixture-symmetric")


PRESETS = {
    "isotropic": lambda seed=0, dim=2, **kw: isotropic(dim=dim, **kw),
    "rank2-manifold": lambda seed=0, dim=64, **kw: rank_manifold(dim=dim, seed=seed, **kw),
    "mixture-symmetric": lambda seed=0, dim=16, **kw: mixture_symmetric(dim=dim, seed=seed, **kw),
}


def build_preset(name, seed=0, **kwargs) -> GaussianMixtureScoreModel:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise InvalidArgumentError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return factory(seed=seed, **kwargs)


def load_model(path) -> GaussianMixtureScoreModel:
    """Read a model file: either a full component listing or ``{"preset": ..., "seed": ...}``."""
    spec = json.loads(Path(path).read_text())
    if "preset" in spec:
        extra = {k: v for k, v in spec.items() if k not in ("preset", "seed")}
        return build_preset(spec["preset"], seed=int(spec.get("seed", 0)), **extra)
    return GaussianMixtureScoreModel.from_dict(spec, name=Path(path).stem)


def save_model(model, path):
    Path(path).write_text(json.dumps(model.to_dict(), indent=1))

"""Low-dimensional bases for sampling trajectories and their coordinates.

The basis for correcting a direction d is built from the buffer rows
``[x_T, d_N, ..., d_{i+1}]`` with d appended (uncentred), keeping the leading
right-singular vectors and orthonormalising them behind ``d / |d|``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from paslab.errors import DegenerateDirectionError, EmptyBasisError, InvalidArgumentError, UndefinedVarianceError

DROP_TOL = 1e-8
MIN_DIRECTION_NORM = 1e-30
# singular values below this fraction of the largest are treated as rank deficiency
RANK_RTOL = 1e-12


@dataclass(frozen=True)
class OrthonormalBasis:
    vectors: np.ndarray  # (k, D), rows orthonormal
    first_is_direction: bool = True

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    @property
    def dimension(self) -> int:
        return self.vectors.shape[1]

    def padded(self, k) -> np.ndarray:
        """(k, D) matrix with zero rows past the effective size."""
        out = np.zeros((k, self.dimension))
        out[: self.size] = self.vectors[:k]
        return out


@dataclass(frozen=True)
class CoordinateVector:
    coords: np.ndarray

    def __len__(self):
        return self.coords.shape[0]


def gram_schmidt(vectors, drop_tol=DROP_TOL):
    """Modified Gram-Schmidt with one re-orthogonalisation pass.

    A candidate whose residual falls below ``drop_tol * |candidate|`` is dropped.
    Returns an array of shape (m, D) with m <= len(vectors).
    """
    basis = []
    for v in np.atleast_2d(np.asarray(vectors, dtype=np.float64)):
        norm = np.linalg.norm(v)
        if not norm > 0:
            continue
        w = v.copy()
        for _ in range(2):
            for u in basis:
                w -= (u @ w) * u
        r = np.linalg.norm(w)
        if r <= drop_tol * norm:
            continue
        basis.append(w / r)
    if not basis:
        raise EmptyBasisError("every candidate vector was degenerate")
    return np.array(basis)


def _orient(basis, rows):
    """Fix the sign of u_2.. so the newest buffer row with a visible component projects positively.

    Coordinates are shared across samples, so every sample's basis has to
    use the same geometric sign convention.
    """
    for j in range(1, basis.shape[0]):
        for row in rows[::-1]:
            p = row @ basis[j]
            if abs(p) > 1e-12 * np.linalg.norm(row):
                if p < 0:
                    basis[j] = -basis[j]
                break
    return basis


def pca_basis(history, d, k=4, drop_tol=DROP_TOL):
    """Orthonormal basis with ``u_1 = d / |d|`` plus up to k-1 trajectory directions.

    ``history`` is a :class:`~paslab.solvers.HistoryBuffer` (single sample) or
    an array of buffer rows.
    """
    if not 1 <= k <= 4:
        raise InvalidArgumentError(f"basis size must be 1..4, got {k}")
    d = np.asarray(d, dtype=np.float64)
    norm = np.linalg.norm(d)
    if not norm >= MIN_DIRECTION_NORM:
        raise DegenerateDirectionError(f"direction norm {norm:.3e} is too small to define u_1")
    rows = history.rows() if hasattr(history, "rows") else np.atleast_2d(np.asarray(history, dtype=np.float64))
    if rows.shape[0] == 0:
        raise InvalidArgumentError("history is empty")
    if rows.shape[1] != d.shape[0]:
        raise InvalidArgumentError(f"history dimension {rows.shape[1]} != direction dimension {d.shape[0]}")
    u1 = d / norm
    if k == 1:
        return OrthonormalBasis(u1[None, :])
    stacked = np.vstack([rows, d[None, :]])
    _, sing, vt = np.linalg.svd(stacked, full_matrices=False)
    keep = sing > RANK_RTOL * sing[0]
    candidates = vt[keep][: k - 1]
    vecs = gram_schmidt(np.vstack([u1[None, :], candidates]), drop_tol)
    # u_1 is exact by construction; gram_schmidt only rescales it
    vecs[0] = u1
    return OrthonormalBasis(_orient(vecs, rows))


def init_coordinates(d, basis_size=4):
    norm = np.linalg.norm(np.asarray(d, dtype=np.float64))
    if not norm >= MIN_DIRECTION_NORM:
        raise DegenerateDirectionError("cannot initialise coordinates from a zero direction")
    coords = np.zeros(basis_size)
    coords[0] = norm
    return CoordinateVector(coords)


def reconstruct_direction(basis: OrthonormalBasis, coords) -> np.ndarray:
    c = coords.coords if isinstance(coords, CoordinateVector) else np.asarray(coords, dtype=np.float64)
    if c.shape[0] != basis.size:
        raise InvalidArgumentError(f"{c.shape[0]} coordinates for a basis of size {basis.size}")
    return c @ basis.vectors


def cumulative_variance(rows, max_k=None):
    """Cumulative share of squared singular values of the uncentred row matrix."""
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if rows.shape[0] < 2:
        raise InvalidArgumentError("need at least two rows")
    sing = np.linalg.svd(rows, compute_uv=False)
    energy = sing ** 2
    total = energy.sum()
    if not total > 0:
        raise UndefinedVarianceError("all-zero matrix has no variance to explain")
    frac = np.cumsum(energy) / total
    frac = np.minimum(frac, 1.0)
    frac[-1] = 1.0
    if max_k is not None:
        if max_k > frac.shape[0]:
            frac = np.concatenate([frac, np.ones(max_k - frac.shape[0])])
        frac = frac[:max_k]
    return frac

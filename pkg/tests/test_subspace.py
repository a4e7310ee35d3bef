import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from paslab.errors import DegenerateDirectionError, EmptyBasisError, InvalidArgumentError, UndefinedVarianceError
from paslab.scorefield import exact_trajectory, rank_manifold
from paslab.solvers import HistoryBuffer, SolverSpec, sample
from paslab.subspace import (
    CoordinateVector,
    cumulative_variance,
    gram_schmidt,
    init_coordinates,
    pca_basis,
    reconstruct_direction,
)
from paslab.timegrid import build_schedule


def assert_orthonormal(u, tol=1e-10):
    np.testing.assert_allclose(u @ u.T, np.eye(u.shape[0]), rtol=0, atol=tol)


def test_gram_schmidt_textbook():
    out = gram_schmidt([[1.0, 0, 0], [1.0, 1.0, 0]])
    np.testing.assert_allclose(out, [[1, 0, 0], [0, 1, 0]], atol=1e-15)


def test_gram_schmidt_drops_collinear():
    out = gram_schmidt([[1.0, 0], [2.0, 0]])
    np.testing.assert_allclose(out, [[1.0, 0.0]])


def test_gram_schmidt_all_degenerate():
    with pytest.raises(EmptyBasisError):
        gram_schmidt([[0.0, 0.0], [0.0, 0.0]])


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, (4, 8), elements=st.floats(-10, 10)))
def test_gram_schmidt_orthonormal_and_idempotent(vectors):
    try:
        u = gram_schmidt(vectors)
    except EmptyBasisError:
        return
    assert_orthonormal(u)
    np.testing.assert_allclose(gram_schmidt(u), u, rtol=0, atol=1e-12)


def test_gram_schmidt_random_d8(rng):
    for _ in range(100):
        assert_orthonormal(gram_schmidt(rng.standard_normal((4, 8))))


def test_rank_two_history():
    rows = np.array([[1.0, 0, 0, 0], [3.0, 0, 0, 0], [-2.0, 0, 0, 0]])
    d = np.array([0.0, 1.0, 0, 0])
    basis = pca_basis(rows, d, k=4)
    assert basis.size == 2
    np.testing.assert_array_equal(basis.vectors[0], d)
    np.testing.assert_allclose(np.abs(basis.vectors[1]), [1.0, 0, 0, 0], atol=1e-14)


def test_first_history_step_has_two_vectors(rng):
    x_T = rng.standard_normal(10)
    basis = pca_basis(HistoryBuffer(x_T), rng.standard_normal(10), 4)
    assert basis.size == 2


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2 ** 31), dim=st.sampled_from([8, 64]), rows=st.integers(1, 10), k=st.integers(2, 4))
def test_basis_orthonormal_with_direction_first(seed, dim, rows, k):
    rng = np.random.default_rng(seed)
    hist = rng.standard_normal((rows, dim)) * rng.uniform(0.1, 100)
    d = rng.standard_normal(dim)
    basis = pca_basis(hist, d, k)
    assert basis.size <= k
    assert_orthonormal(basis.vectors)
    np.testing.assert_allclose(basis.vectors[0], d / np.linalg.norm(d), rtol=0, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2 ** 31), gamma=st.floats(1e-3, 1e3))
def test_scale_equivariance(seed, gamma):
    rng = np.random.default_rng(seed)
    hist, d = rng.standard_normal((5, 12)), rng.standard_normal(12)
    a, b = pca_basis(hist, d, 4), pca_basis(gamma * hist, gamma * d, 4)
    assert a.size == b.size
    assert np.all(np.abs(np.sum(a.vectors * b.vectors, axis=1)) > 1 - 1e-10)


def test_sign_convention_newest_row_positive(rng):
    hist, d = rng.standard_normal((4, 9)), rng.standard_normal(9)
    basis = pca_basis(hist, d, 4)
    for u in basis.vectors[1:]:
        assert hist[-1] @ u > 0


def test_degenerate_direction():
    with pytest.raises(DegenerateDirectionError):
        pca_basis(np.ones((2, 3)), np.zeros(3))
    with pytest.raises(DegenerateDirectionError):
        init_coordinates(np.zeros(3))
    with pytest.raises(InvalidArgumentError):
        pca_basis(np.ones((2, 3)), np.ones(4))


def test_init_coordinates():
    np.testing.assert_array_equal(init_coordinates(np.array([3.0, 4.0]), 4).coords, [5, 0, 0, 0])
    np.testing.assert_array_equal(init_coordinates(np.array([3.0, 4.0]), 2).coords, [5, 0])


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2 ** 31), k=st.integers(2, 4))
def test_reconstruction_identity(seed, k):
    rng = np.random.default_rng(seed)
    d = rng.standard_normal(16) * rng.uniform(1e-3, 1e3)
    basis = pca_basis(rng.standard_normal((3, 16)), d, k)
    coords = init_coordinates(d, basis.size)
    out = reconstruct_direction(basis, coords)
    assert np.linalg.norm(out - d) <= 1e-12 * np.linalg.norm(d)


def test_reconstruct_basic_cases(rng):
    basis = pca_basis(rng.standard_normal((5, 6)), rng.standard_normal(6), 4)
    assert basis.size == 4
    np.testing.assert_array_equal(reconstruct_direction(basis, np.zeros(4)), np.zeros(6))
    np.testing.assert_array_equal(reconstruct_direction(basis, CoordinateVector(np.array([0.0, 1, 0, 0]))),
                                  basis.vectors[1])
    with pytest.raises(InvalidArgumentError):
        reconstruct_direction(basis, np.zeros(3))


def test_cumulative_variance_rank_one():
    rows = np.outer([1.0, -2.0, 3.0], [1.0, 2.0, 0.5, 0.0])
    np.testing.assert_allclose(cumulative_variance(rows, 3), [1.0, 1.0, 1.0], atol=1e-12)


def test_cumulative_variance_errors():
    with pytest.raises(UndefinedVarianceError):
        cumulative_variance(np.zeros((3, 4)))
    with pytest.raises(InvalidArgumentError):
        cumulative_variance(np.ones((1, 4)))


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, (6, 5), elements=st.floats(-100, 100)))
def test_cumulative_variance_monotone(rows):
    try:
        frac = cumulative_variance(rows)
    except UndefinedVarianceError:
        return
    assert np.all(np.diff(frac) >= 0)
    assert abs(frac[-1] - 1.0) <= 1e-12


def test_manifold_trajectory_is_three_dimensional():
    model = rank_manifold(dim=64, seed=0)
    x_T = 80 * np.random.default_rng(1).standard_normal(64)
    sched = build_schedule(7, 0.002, 80, 99)
    rows = np.array([exact_trajectory(model, x_T, t, 80.0) for t in sched.times])
    assert cumulative_variance(rows, 3)[2] >= 0.999


def test_history_rows_lie_in_size4_basis():
    model = rank_manifold(dim=64, seed=0)
    x_T = 80 * np.random.default_rng(2).standard_normal(64)
    rec = sample(model, SolverSpec("euler"), build_schedule(n_steps=10), x_T)
    buf = HistoryBuffer(x_T)
    for i in range(10, 0, -1):
        d = rec.direction(i)
        if len(buf) >= 3:
            u = pca_basis(buf, d, 4).vectors
            rows = buf.rows()
            resid = rows - (rows @ u.T) @ u
            assert np.all(np.linalg.norm(resid, axis=1) <= 1e-3 * np.linalg.norm(rows, axis=1))
        buf.push(d)

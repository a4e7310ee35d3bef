import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from paslab.errors import InvalidArgumentError, UnsupportedModelError
from paslab.scorefield import (
    GaussianComponent,
    GaussianMixtureScoreModel,
    build_preset,
    data_prediction,
    exact_trajectory,
    exact_trajectory_derivative,
    isotropic,
    load_model,
    log_density,
    mixture_symmetric,
    noise_prediction,
    rank_manifold,
    save_model,
    score,
)


def fd_score(model, x, t, h=1e-5):
    g = np.zeros_like(x)
    for j in range(x.shape[0]):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (log_density(model, x + e, t) - log_density(model, x - e, t)) / (2 * h)
    return g


def test_standard_gaussian_values():
    m = isotropic(dim=2)
    x = np.array([2.0, 0.0])
    np.testing.assert_allclose(score(m, x, 1.0), [-1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(noise_prediction(m, x, 1.0), [1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(data_prediction(m, x, 1.0), [1.0, 0.0], atol=1e-15)


def test_symmetric_mixture_vanishes_at_origin():
    m = mixture_symmetric(dim=6, separation=4.0)
    np.testing.assert_allclose(score(m, np.zeros(6), 0.7), 0.0, atol=1e-14)


def test_log_density_matches_dense_gaussian(aniso16, rng):
    from scipy.stats import multivariate_normal
    comp = aniso16.components[0]
    cov = comp.eigenvectors @ np.diag(comp.eigenvalues) @ comp.eigenvectors.T
    for t in (0.05, 1.0, 30.0):
        x = comp.mean + rng.standard_normal(16) * (1 + t)
        ref = multivariate_normal(comp.mean, cov + t * t * np.eye(16)).logpdf(x)
        assert log_density(aniso16, x, t) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("name", ["iso", "aniso", "mixture", "partial"])
def test_score_matches_finite_differences(name, aniso16, mixture3, rng):
    partial = GaussianMixtureScoreModel((GaussianComponent(
        1.0, np.array([1.0, -1.0, 0.5]), np.array([2.0]), np.array([[0.6], [0.8], [0.0]])),))
    model = {"iso": isotropic(dim=4, variance=2.0), "aniso": aniso16, "mixture": mixture3, "partial": partial}[name]
    worst = 0.0
    for _ in range(100):
        t = float(np.exp(rng.uniform(np.log(0.3), np.log(20.0))))
        x = rng.standard_normal(model.dimension) * (1.0 + t)
        s = score(model, x, t)
        worst = max(worst, np.linalg.norm(s - fd_score(model, x, t)) / np.linalg.norm(s))
    assert worst < 1e-6


def test_relations_between_predictions(mixture3, rng):
    x = rng.standard_normal((7, 5)) * 3
    for t in (0.01, 0.5, 9.0):
        eps = noise_prediction(mixture3, x, t)
        assert np.array_equal(eps, -t * score(mixture3, x, t))
        np.testing.assert_allclose(data_prediction(mixture3, x, t), x - t * eps, rtol=0, atol=1e-12 * (1 + np.abs(x).max()))


def test_vanishing_noise_limit(mixture3, rng):
    x = rng.standard_normal(5)
    np.testing.assert_allclose(data_prediction(mixture3, x, 1e-8), x, atol=1e-6)


def test_zero_mean_gaussian_has_no_noise_at_mode():
    np.testing.assert_array_equal(noise_prediction(isotropic(dim=3), np.zeros(3), 2.0), np.zeros(3))


def test_score_stays_finite_far_from_means(mixture3):
    for dist in (10.0, 50.0, 500.0):
        x = np.full(5, dist * 2.0)  # component stds are <= 2
        assert np.all(np.isfinite(score(mixture3, x, 0.01)))


def test_batch_matches_loop(mixture3, rng):
    x = rng.standard_normal((4, 5))
    batched = score(mixture3, x, 0.3)
    for b in range(4):
        np.testing.assert_allclose(batched[b], score(mixture3, x[b], 0.3), rtol=1e-14, atol=1e-14)


@pytest.mark.parametrize("t", [0.0, -1.0, float("nan")])
def test_nonpositive_time_rejected(t):
    with pytest.raises(InvalidArgumentError):
        score(isotropic(dim=2), np.zeros(2), t)


def test_bad_models_rejected():
    with pytest.raises(InvalidArgumentError):
        GaussianMixtureScoreModel(())
    with pytest.raises(InvalidArgumentError):
        GaussianComponent(1.0, np.zeros(2), np.ones(2), np.array([[1.0, 1.0], [0.0, 1.0]]))
    c = GaussianComponent(0.5, np.zeros(2), np.ones(2), np.eye(2))
    with pytest.raises(InvalidArgumentError):
        GaussianMixtureScoreModel((c,))  # weights sum to 0.5


def test_exact_trajectory_1d_value(gauss1d):
    x = exact_trajectory(gauss1d, np.array([80.0]), 0.002, 80.0)
    # 80 * sqrt((1 + t^2) / 6401) evaluated at 40 digits
    assert x[0] == pytest.approx(0.99992388399584997596, rel=1e-14)
    assert x[0] == pytest.approx(1.0, abs=1e-3)


def test_exact_trajectory_identity_at_start(aniso16, rng):
    x_T = 80 * rng.standard_normal(16)
    assert np.array_equal(exact_trajectory(aniso16, x_T, 80.0, 80.0), x_T)


def test_exact_trajectory_rejects_mixture(mixture3):
    with pytest.raises(UnsupportedModelError):
        exact_trajectory(mixture3, np.zeros(5), 1.0, 2.0)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), log_t=st.floats(np.log(0.01), np.log(60.0)))
def test_exact_trajectory_solves_the_ode(seed, log_t):
    rng = np.random.default_rng(seed)
    model = rank_manifold(dim=12, seed=seed % 7)
    x_T = 80 * rng.standard_normal(12)
    t, T = float(np.exp(log_t)), 80.0
    h = 1e-5 * t
    fd = (exact_trajectory(model, x_T, t + h, T) - exact_trajectory(model, x_T, t - h, T)) / (2 * h)
    eps = noise_prediction(model, exact_trajectory(model, x_T, t, T), t)
    assert np.linalg.norm(fd - eps) / np.linalg.norm(eps) < 1e-5
    np.testing.assert_allclose(exact_trajectory_derivative(model, x_T, t, T), eps, rtol=1e-9, atol=1e-12)


def test_unlisted_directions_scale_linearly():
    comp = GaussianComponent(1.0, np.zeros(3), np.array([4.0]), np.array([[1.0], [0.0], [0.0]]))
    model = GaussianMixtureScoreModel((comp,))
    x = exact_trajectory(model, np.array([10.0, 10.0, -20.0]), 2.0, 10.0)
    np.testing.assert_allclose(x[1:], [2.0, -4.0], rtol=1e-14)
    assert x[0] == pytest.approx(10.0 * np.sqrt(8.0 / 104.0), rel=1e-14)


def test_presets_and_model_files(tmp_path):
    m = build_preset("rank2-manifold", seed=3, dim=8)
    assert m.dimension == 8 and sorted(m.components[0].eigenvalues)[-2:] == [9.0, 25.0]
    assert build_preset("rank2-manifold", seed=3, dim=8).components[0].mean.tolist() == m.components[0].mean.tolist()
    save_model(m, tmp_path / "m.json")
    loaded = load_model(tmp_path / "m.json")
    assert np.array_equal(loaded.components[0].eigenvectors, m.components[0].eigenvectors)
    (tmp_path / "p.json").write_text(json.dumps({"preset": "mixture-symmetric", "seed": 1, "dim": 4}))
    assert len(load_model(tmp_path / "p.json").components) == 2
    with pytest.raises(InvalidArgumentError):
        build_preset("nope")

import numpy as np
import pytest

from paslab.scorefield import GaussianComponent, GaussianMixtureScoreModel, isotropic, random_orthonormal


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def gauss1d():
    """1-D N(0, 1)."""
    return isotropic(dim=1, variance=1.0)


@pytest.fixture
def aniso16():
    rng = np.random.default_rng(7)
    lam = np.geomspace(1e-2, 25.0, 16)
    comp = GaussianComponent(1.0, rng.standard_normal(16), lam, random_orthonormal(16, rng))
    return GaussianMixtureScoreModel((comp,), name="aniso16")


@pytest.fixture
def mixture3():
    rng = np.random.default_rng(3)
    comps = []
    for w in (0.2, 0.3, 0.5):
        comps.append(GaussianComponent(w, 3 * rng.standard_normal(5), rng.uniform(0.1, 4.0, 5),
                                       random_orthonormal(5, rng)))
    return GaussianMixtureScoreModel(tuple(comps))


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_line():
    """Record a one-line PASS/FAIL verdict shown in the terminal summary."""
    def record(number, ok, detail):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from paslab.errors import InvalidArgumentError
from paslab.timegrid import build_schedule, refine_for_teacher

# evaluated at 40 digits with mpmath
EDM_N10 = [0.002, 0.016720753234993921503, 0.085087202689390232634, 0.31828328883929625161,
           0.96541692633189478612, 2.5152189761471585788, 5.8389476310118868939,
           12.381576138540885348, 24.408341786580110087, 45.313734075226597421, 80.0]


def test_linear_rho():
    s = build_schedule(1, 0.25, 1, 3)
    np.testing.assert_allclose(s.times, [0.25, 0.5, 0.75, 1.0], rtol=0, atol=1e-15)


def test_edm_schedule_matches_high_precision():
    s = build_schedule(7, 0.002, 80, 10)
    assert s.times[10] == 80.0 and s.times[0] == 0.002
    assert s.times[5] == pytest.approx(2.515, abs=5e-4)
    # 4 ulp
    for got, want in zip(s.times, EDM_N10):
        assert abs(got - want) <= 4 * math.ulp(want)


def test_single_step_endpoints():
    s = build_schedule(7, 0.002, 80, 1)
    assert s.times.tolist() == [0.002, 80.0]


@pytest.mark.parametrize("args", [
    (0, 0.002, 80, 10), (7, 0, 80, 10), (7, 0.002, 0.001, 10), (7, 0.002, 80, 0),
    (7, float("nan"), 80, 10), (7, 0.002, float("inf"), 10), (-1, 0.002, 80, 10), (7, 0.002, 80, 2.5),
])
def test_invalid_arguments(args):
    with pytest.raises(InvalidArgumentError):
        build_schedule(*args)


@pytest.mark.parametrize("n, n_prime, m, steps", [(10, 100, 9, 100), (8, 100, 12, 104), (10, 10, 0, 10)])
def test_refinement_counts(n, n_prime, m, steps):
    ref = refine_for_teacher(build_schedule(7, 0.002, 80, n), n_prime)
    assert ref.m_inserted == m
    assert ref.teacher.n_steps == steps
    assert ref.index_map.tolist() == [i * (m + 1) for i in range(n + 1)]


def test_identity_refinement_equals_student():
    s = build_schedule(7, 0.002, 80, 10)
    ref = refine_for_teacher(s, 10)
    assert np.array_equal(ref.teacher.times, s.times)


def test_refinement_rejects_coarser_teacher():
    with pytest.raises(InvalidArgumentError):
        refine_for_teacher(build_schedule(n_steps=10), 9)


def test_csv_roundtrip():
    s = build_schedule(7, 0.002, 80, 4)
    lines = s.to_csv().strip().split("\n")
    assert lines[0] == "index,time"
    assert [float(l.split(",")[1]) for l in lines[1:]] == s.times.tolist()


@settings(max_examples=200, deadline=None)
@given(rho=st.floats(1, 10), n=st.integers(2, 20), m=st.integers(0, 16),
       t_min=st.floats(1e-4, 0.1), t_max=st.floats(1.0, 200.0))
def test_nested_grids_align(rho, n, m, t_min, t_max):
    student = build_schedule(rho, t_min, t_max, n)
    ref = refine_for_teacher(student, n * (m + 1))
    assert ref.m_inserted == m
    aligned = ref.teacher.times[ref.index_map]
    assert np.all(np.abs(aligned - student.times) / student.times < 1e-12)


@settings(max_examples=200, deadline=None)
@given(rho=st.floats(0.5, 12), n=st.integers(1, 60), t_min=st.floats(1e-5, 1.0), span=st.floats(1e-3, 500.0))
def test_monotone_with_exact_endpoints(rho, n, t_min, span):
    s = build_schedule(rho, t_min, t_min + span, n)
    assert s.times[0] == t_min and s.times[-1] == t_min + span
    assert np.all(np.diff(s.times) > 0)

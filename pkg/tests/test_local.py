import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from omffm.config import SolverConfig
from omffm.core import Box, NumericalError
from omffm.local import (
    armijo_backtrack,
    box_descent_direction,
    criticality_residual,
    face_polish_direction,
    local_weak_efficient,
    steepest_descent_direction,
)
from omffm.problems import MopProblem, get_problem


def test_zero_jacobian():
    d, theta, lam = steepest_descent_direction(np.zeros((2, 3)))
    assert np.all(d == 0) and theta == 0
    assert np.allclose(lam, [0.5, 0.5])


def test_equal_gradients():
    g = np.array([1.0, -2.0])
    d, theta, lam = steepest_descent_direction(np.vstack([g, g]))
    assert np.allclose(d, -g)
    assert theta == pytest.approx(-0.5 * g @ g)


def test_opposite_gradients():
    d, theta, lam = steepest_descent_direction(np.array([[1.0], [-1.0]]))
    assert np.allclose(d, 0) and theta == pytest.approx(0)
    assert np.allclose(lam, [0.5, 0.5])


def test_nonfinite_jacobian():
    with pytest.raises(NumericalError):
        steepest_descent_direction(np.array([[np.nan, 0.0], [0.0, 1.0]]))


def primal_value(J, d):
    return np.max(J @ d) + 0.5 * d @ d


jacobians = st.tuples(st.integers(2, 3), st.integers(1, 6)).flatmap(
    lambda s: arrays(float, s, elements=st.floats(-5, 5))
)


@given(jacobians)
def test_direction_certificates(J):
    d, theta, lam = steepest_descent_direction(J)
    assert np.all(lam >= 0) and abs(lam.sum() - 1) < 1e-8
    assert np.allclose(d, -J.T @ lam, atol=1e-8)
    assert theta == pytest.approx(primal_value(J, d), abs=1e-10)
    assert theta <= 1e-12


@given(jacobians, st.integers(0, 2**32 - 1))
def test_direction_is_primal_optimal(J, seed):
    """No random perturbation improves the primal subproblem value."""
    d, theta, _ = steepest_descent_direction(J)
    rng = np.random.default_rng(seed)
    for _ in range(50):
        e = d + rng.normal(scale=0.3, size=d.shape)
        assert primal_value(J, e) >= theta - 1e-9


def test_box_direction_freezes_blocked_coordinates():
    box = Box([0.0, 0.0], [1.0, 1.0])
    J = np.array([[1.0, 1.0], [1.0, 2.0]])
    d, theta, lam = box_descent_direction(J, np.array([0.0, 0.5]), box)
    assert d[0] == 0 and d[1] < 0 and theta < 0


def test_armijo_hand_example():
    one = MopProblem("sq", 1, 2, Box([-2.0], [2.0]), lambda y: np.array([y[0] ** 2, y[0] ** 2]))
    ls = armijo_backtrack(one, [1.0], [-2.0], -2.0, 1e-4, 1.0)
    assert ls.step == 0.5


def test_armijo_linear_takes_full_step():
    lin = MopProblem("lin", 1, 2, Box([-5.0], [5.0]), lambda y: np.array([y[0], 2 * y[0]]))
    assert armijo_backtrack(lin, [0.0], [-1.0], -0.5, 1e-4, 1.0).step == 1.0


def test_armijo_uphill_fails():
    lin = MopProblem("lin", 1, 2, Box([-5.0], [5.0]), lambda y: np.array([y[0], -y[0]]))
    assert armijo_backtrack(lin, [0.0], [-1.0], -0.5, 1e-4, 1.0) is None


def test_convex_toy_converges_to_segment(rng):
    p = get_problem("CONVEX2").fresh()
    for _ in range(200):
        y0 = p.box.lower + rng.random(2) * p.box.width
        r = local_weak_efficient(p, y0)
        assert r.converged and abs(r.criticality) < 1e-6
        assert abs(r.point[0] - r.point[1]) < 1e-6 and -1e-6 <= r.point[0] <= 1 + 1e-6
        J = p.jacobian(r.point)
        assert np.linalg.norm(J.T @ r.multipliers) < 1e-5


def test_start_at_critical_point():
    p = get_problem("CONVEX2").fresh()
    r = local_weak_efficient(p, [0.5, 0.5])
    assert r.iterations == 0 and np.array_equal(r.point, [0.5, 0.5])


def test_dtlz2n2_unit_circle(rng):
    p = get_problem("DTLZ2n2").fresh()
    for _ in range(20):
        r = local_weak_efficient(p, rng.random(2))
        assert r.converged
        assert abs(np.linalg.norm(r.objectives) - 1) < 1e-3


def test_monotone_armijo_replay(rng):
    p = get_problem("P4a").fresh()
    r = local_weak_efficient(p, rng.random(2), record=True)
    for y, fy, theta, step, ft in r.trace:
        assert np.all(ft <= fy + 1e-4 * step * min(theta, 0.0) + 1e-15)


def test_budget_flag():
    p = get_problem("ZDT1").fresh(budget=5)
    r = local_weak_efficient(p, np.full(30, 0.5))
    assert r.status == "budget" and not r.converged


def test_face_polish_reaches_efficient_endpoint():
    """Without polishing, ZDT1 descent stalls at weakly efficient (0, g > 1)."""
    p = get_problem("ZDT1").fresh()
    y0 = np.random.default_rng(0).random(30)
    raw = local_weak_efficient(p, y0, polish=False)
    assert raw.objectives[0] == 0 and raw.objectives[1] > 1.5
    polished = local_weak_efficient(p, y0)
    assert polished.converged
    assert np.allclose(polished.objectives, [0, 1])


def test_face_polish_none_when_certificate_full():
    box = Box([0.0], [1.0])
    assert face_polish_direction(np.array([[1.0], [-1.0]]), np.array([0.5, 0.5]), [0.5], box) is None


def test_residual_projected_at_bound():
    box = Box([0.0, 0.0], [1.0, 1.0])
    J = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert criticality_residual(J, [1.0, 0.0], [0.0, 0.3], box) == 0.0
    assert criticality_residual(J, [1.0, 0.0], [0.0, 0.3]) == 1.0

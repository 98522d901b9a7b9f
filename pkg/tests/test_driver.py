import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from omffm.config import SolverConfig
from omffm.core import Box, ConfigurationError, nondominated_filter, strictly_dominates
from omffm.driver import (
    context_for,
    estimate_ideal_nadir,
    generate_initial_points,
    global_phase,
    make_trial_points,
    run_local_only,
    run_omffm,
    spacing_floor,
)
from omffm.local import local_weak_efficient, steepest_descent_direction
from omffm.problems import MopProblem, get_problem, reference_front

unit_square = MopProblem(
    "sq", 2, 2, Box([0.0, 0.0], [1.0, 1.0]),
    lambda y: np.array([y @ y, (y - 1) @ (y - 1)]),
    lambda y: np.array([2 * y, 2 * (y - 1)]),
)


def test_single_start_is_midpoint():
    assert np.array_equal(generate_initial_points(unit_square, 1, 0), [[0.5, 0.5]])


def test_spacing_rule():
    P = generate_initial_points(unit_square, 4, 3)
    assert P.shape == (4, 2)
    gaps = [np.linalg.norm(a - b) for a, b in itertools.combinations(P, 2)]
    assert min(gaps) >= 0.1 * np.sqrt(2) / 2


@given(st.integers(2, 40), st.integers(0, 1000))
def test_starts_feasible_deterministic(N, seed):
    p = get_problem("P1")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        A = generate_initial_points(p, N, seed)
        B = generate_initial_points(p, N, seed)
    assert np.array_equal(A, B)
    assert all(p.box.contains(y) for y in A)


def test_spacing_warning_when_impossible():
    tiny = MopProblem("tiny", 1, 2, Box([0.0], [1e-9]), lambda y: np.array([y[0], -y[0]]))
    with pytest.warns(RuntimeWarning):
        P = generate_initial_points(tiny, 500, 0)
    assert len(P) == 500


def test_ideal_convex_toy():
    ideal, nadir = estimate_ideal_nadir(get_problem("CONVEX2").fresh())
    assert np.allclose(ideal, 0, atol=1e-8)
    assert np.all(ideal <= nadir)
    assert np.allclose(nadir, 2, atol=1e-6)


def test_identical_objectives():
    same = MopProblem("same", 2, 2, Box([-1.0, -1.0], [1.0, 1.0]),
                      lambda y: np.array([y @ y, y @ y]), lambda y: np.array([2 * y, 2 * y]))
    ideal, nadir = estimate_ideal_nadir(same)
    assert np.allclose(ideal, nadir)


def test_zdt1_ideal_nadir():
    ideal, nadir = estimate_ideal_nadir(get_problem("ZDT1").fresh())
    assert np.allclose(ideal, [0, 0], atol=0.05)
    assert np.allclose(nadir, [1, 1], atol=0.05)


def test_trial_points_center():
    T = make_trial_points(unit_square, [0.5, 0.5], 0.1, 4, 0)
    assert T.shape == (4, 2)
    assert np.all(np.linalg.norm(T - 0.5, axis=1) > 0.1)


@given(st.integers(0, 1000), st.sampled_from([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0]]))
def test_trial_points_corner(seed, corner):
    T = make_trial_points(unit_square, corner, 0.1, 8, seed)
    assert all(unit_square.box.contains(t) for t in T)
    assert np.all(np.linalg.norm(T - corner, axis=1) > 0.1)


def test_trial_points_epsilon_too_large():
    with pytest.raises(ConfigurationError):
        make_trial_points(unit_square, [0.5, 0.5], 2.0, 4, 0)


def test_convex_toy_exhausted():
    p = get_problem("CONVEX2").fresh()
    cfg = SolverConfig()
    a = local_weak_efficient(p, [0.3, 0.9], cfg)
    out = global_phase(p, a, context_for(a, cfg, p.n), cfg, 0)
    assert not out.is_improved and out.reason in ("mu_below_mu_L", "boundary_exhausted")
    assert out.rounds <= out.round_bound(cfg.mu_ini, cfg.mu_hat)


def test_small_mu_ini_one_round():
    p = get_problem("P4a").fresh()
    cfg = SolverConfig(mu_ini=1e-6)
    a = local_weak_efficient(p, [0.3, 0.0], cfg)
    out = global_phase(p, a, context_for(a, cfg, p.n), cfg, 0)
    if not out.is_improved:
        assert out.rounds == 1


def dominated_anchor():
    """A P4a anchor on a dominated descending segment, with a grid witness."""
    p = get_problem("P4a").fresh()
    a = local_weak_efficient(p, [0.962, 0.725])
    t = np.linspace(0, 1, 100001)
    f2 = 1 - t * t - 0.3 * t * np.sin(10 * np.pi * t)
    witness = (t < a.objectives[0]) & (f2 < a.objectives[1])
    return p, a, witness.any()


def test_escape_from_dominated_anchor():
    p, a, has_witness = dominated_anchor()
    assert has_witness
    cfg = SolverConfig()
    hits = 0
    for seed in range(20):
        out = global_phase(p, a, context_for(a, cfg, p.n), cfg, np.random.default_rng(seed))
        if out.is_improved:
            assert strictly_dominates(out.objectives, a.objectives)
            assert np.array_equal(p.objectives(out.improved), out.objectives)
            hits += 1
    assert hits >= 5


def test_convex_run_front_is_critical():
    p = get_problem("CONVEX2")
    r = run_omffm(p, SolverConfig(N=10, seed=1))
    assert len(r.pff) >= 1
    for x, f in r.pff:
        assert abs(steepest_descent_direction(p.jacobian(x)).theta) < 1e-6
    assert np.array_equal(r.pf.objectives, nondominated_filter(r.wpf).objectives)
    assert np.array_equal(r.pff.objectives, nondominated_filter(r.wpff).objectives)


def test_p4a_front_close_to_reference():
    r = run_omffm(get_problem("P4a"), SolverConfig(N=20, seed=0))
    ref = reference_front("P4a")
    for f in r.pff.objectives:
        assert not np.any(np.all(ref < f - 1e-3, axis=1))


def test_zero_budget():
    r = run_omffm(get_problem("P4a"), SolverConfig(eval_budget=0))
    assert len(r.wpf) == len(r.wpff) == len(r.pf) == len(r.pff) == 0
    assert r.termination == "budget" and r.evals == 0


def test_small_budget_stops():
    r = run_omffm(get_problem("P4a"), SolverConfig(N=5, eval_budget=100))
    assert r.termination == "budget" and r.evals <= 100


def test_local_only_has_no_escapes():
    r = run_local_only(get_problem("P4a"), SolverConfig(N=5))
    assert r.global_escapes == 0
    assert np.array_equal(r.wpf.objectives, r.wpff.objectives)


def test_report_dict_shape():
    d = run_omffm(get_problem("CONVEX2"), SolverConfig(N=3)).to_dict()
    for key in ("wpf", "wpff", "pf", "pff", "evals", "local_calls", "global_escapes", "termination", "wall_time"):
        assert key in d

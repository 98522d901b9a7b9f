"""Filled-function solver: alternate local descent and filled-function escapes.

For every start point::

    x = local descent from the start           -> WPF
    repeat:
        global phase around x
        if it finds y with F(y) < F(x) componentwise:
            x = local descent from y
        else:
            break                                -> WPFF (final x)

PF and PFF are the non-dominated filtrations of WPF and WPFF.
"""

from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize

from omffm.config import SolverConfig
from omffm.core import (
    BudgetExhausted,
    ConfigurationError,
    ContractError,
    ParetoArchive,
    active_bounds,
    nondominated_filter,
    nondominated_mask,
    project_to_box,
    strictly_dominates,
)
from omffm.filled import (
    MU_L_FLOOR,
    FilledContext,
    _gradient,
    _values,
    adaptive_mu_lower,
    classify,
    descent_check,
    raw_mu_upper,
)
from omffm.local import LocalDescentResult, local_weak_efficient
from omffm.problems import MopProblem

log = logging.getLogger(__name__)

MAX_INNER_REDUCTIONS = 60
MU_UNDERFLOW = 1e-300
MAX_BACKTRACKS = 40
MAX_TRIAL_STEPS = 200
RESAMPLE_CAP = 1000
SPACING_RETRIES = 100
NADIR_RANDOM_STARTS = 5
HV_MARGIN = 0.1


# ---------------------------------------------------------------- start points


def spacing_floor(problem: MopProblem, N: int) -> float:
    return 0.1 * problem.box.diameter / math.sqrt(N)


def generate_initial_points(problem: MopProblem, N: int, seed: int = 0) -> np.ndarray:
    """``N`` well-spread points: Latin-hypercube strata plus a spacing filter.

    A point closer than :func:`spacing_floor` to an accepted one is redrawn
    uniformly up to 100 times; if that fails the farthest candidate is kept
    and a warning is issued. ``N = 1`` gives the box midpoint.
    """
    if N < 1:
        raise ContractError("N must be at least 1")
    box = problem.box
    if N == 1:
        return box.midpoint[None, :].copy()
    rng = np.random.default_rng(seed)
    n = problem.n
    strata = np.stack([rng.permutation(N) for _ in range(n)], axis=1)
    U = (strata + rng.random((N, n))) / N
    candidates = box.lower + U * box.width
    floor = spacing_floor(problem, N)
    points = [candidates[0]]
    short = False
    for cand in candidates[1:]:
        best, best_gap = cand, _gap(cand, points)
        tries = 0
        while best_gap < floor and tries < SPACING_RETRIES:
            alt = box.lower + rng.random(n) * box.width
            gap = _gap(alt, points)
            if gap > best_gap:
                best, best_gap = alt, gap
            tries += 1
        short |= best_gap < floor
        points.append(best)
    if short:
        warnings.warn(
            f"{problem.name}: spacing floor {floor:.3g} not met for N={N}",
            RuntimeWarning,
            stacklevel=2,
        )
    return np.array(points)


def _gap(y: np.ndarray, points: list) -> float:
    return float(np.min(np.linalg.norm(np.asarray(points) - y, axis=1)))


# ---------------------------------------------------------------- ideal / nadir


def _minimize_objective(problem: MopProblem, j: int, x0: np.ndarray) -> np.ndarray:
    box = problem.box
    res = minimize(
        lambda y: problem.evaluate(project_to_box(y, box))[j],
        x0,
        jac=lambda y: problem.jacobian(project_to_box(y, box))[j],
        method="L-BFGS-B",
        bounds=list(zip(box.lower, box.upper)),
    )
    return project_to_box(res.x, box)


def _lexicographic_row(problem: MopProblem, j: int, y: np.ndarray, fy: np.ndarray) -> np.ndarray:
    """Improve the other objectives while keeping ``f_j`` at its minimum."""
    box = problem.box
    others = [k for k in range(problem.m) if k != j]
    cap = fy[j] + 1e-9 * max(1.0, abs(fy[j]))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = minimize(
            lambda z: float(np.sum(problem.evaluate(project_to_box(z, box))[others])),
            y,
            jac=lambda z: np.sum(problem.jacobian(project_to_box(z, box))[others], axis=0),
            method="SLSQP",
            bounds=list(zip(box.lower, box.upper)),
            constraints=[
                {
                    "type": "ineq",
                    "fun": lambda z: cap - problem.evaluate(project_to_box(z, box))[j],
                    "jac": lambda z: -problem.jacobian(project_to_box(z, box))[j],
                }
            ],
        )
    z = project_to_box(res.x, box)
    fz = problem.evaluate(z)
    if fz[j] <= cap and np.sum(fz[others]) < np.sum(fy[others]):
        return fz
    return fy


def estimate_ideal_nadir(problem: MopProblem, cfg: Optional[SolverConfig] = None):
    """Payoff-table estimate of the ideal and nadir objective vectors.

    Each objective is minimised from ``lb``, the midpoint, ``ub`` and five
    seeded random starts. The best minimiser of ``f_j`` then has its other
    objectives reduced subject to ``f_j`` staying at the minimum, giving
    payoff row ``j``. ``ideal`` is the column-wise minimum of the table and
    ``nadir`` the column-wise maximum over its non-dominated rows.
    """
    cfg = cfg or SolverConfig()
    box = problem.box
    rng = np.random.default_rng([cfg.seed, 0x1DEA])
    starts = [box.lower, box.midpoint, box.upper]
    starts += [box.lower + rng.random(problem.n) * box.width for _ in range(NADIR_RANDOM_STARTS)]
    rows = []
    for j in range(problem.m):
        best_y, best_f = None, None
        for x0 in starts:
            y = _minimize_objective(problem, j, np.array(x0, dtype=float))
            fy = problem.evaluate(y)
            if best_f is None or fy[j] < best_f[j] or (
                fy[j] == best_f[j] and np.sum(fy) < np.sum(best_f)
            ):
                best_y, best_f = y, fy
        rows.append(_lexicographic_row(problem, j, best_y, best_f))
    table = np.array(rows)
    ideal = table.min(axis=0)
    nadir = table[nondominated_mask(table)].max(axis=0)
    return ideal, np.maximum(nadir, ideal)


def hv_reference_point(ideal, nadir) -> np.ndarray:
    ideal, nadir = np.asarray(ideal, dtype=float), np.asarray(nadir, dtype=float)
    return nadir + HV_MARGIN * (nadir - ideal)


# ---------------------------------------------------------------- trial points


def make_trial_points(problem: MopProblem, anchor, epsilon: float, count: int, seed) -> np.ndarray:
    """``count`` feasible points farther than ``epsilon`` from ``anchor``.

    Point ``i`` perturbs coordinate ``(i // 2) % n`` by ``+-r`` with
    ``r ~ U[epsilon, 3 epsilon]`` (sign alternating) and projects onto the
    box. A point that projection pulled back inside the ``epsilon`` ball is
    replaced by a uniform draw from the box outside the ball. ``seed`` may
    be an int or a ``numpy.random.Generator``.
    """
    box = problem.box
    anchor = np.asarray(anchor, dtype=float)
    if count < 1:
        raise ContractError("count must be positive")
    if epsilon >= box.diameter:
        raise ConfigurationError(f"epsilon={epsilon} is not below the box diameter {box.diameter:.6g}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    out = np.empty((count, problem.n))
    for i in range(count):
        axis = (i // 2) % problem.n
        sign = 1.0 if i % 2 == 0 else -1.0
        y = anchor.copy()
        y[axis] += sign * rng.uniform(epsilon, 3 * epsilon)
        y = project_to_box(y, box)
        tries = 0
        while np.linalg.norm(y - anchor) <= epsilon:
            if tries >= RESAMPLE_CAP:
                raise ConfigurationError(
                    f"no feasible point farther than epsilon={epsilon} from the anchor"
                )
            y = box.lower + rng.random(problem.n) * box.width
            tries += 1
        out[i] = y
    return out


# ---------------------------------------------------------------- global phase


@dataclass
class GlobalOutcome:
    """Result of one escape attempt.

    ``improved`` carries the escape point (with its objectives) or ``None``.
    ``reason`` is ``"improved"``, ``"mu_below_mu_L"``, ``"boundary_exhausted"``,
    ``"max_rounds"`` or ``"budget"``.
    """

    improved: Optional[np.ndarray]
    objectives: Optional[np.ndarray]
    reason: str
    rounds: int
    mu_L_history: list = field(default_factory=list)
    mu_final: float = float("nan")
    steps: int = 0

    @property
    def is_improved(self) -> bool:
        return self.improved is not None

    def round_bound(self, mu_ini: float, mu_hat: float) -> int:
        """Outer rounds allowed by the geometric decrease of ``mu`` to ``min mu_L``."""
        lo = min(self.mu_L_history, default=MU_L_FLOOR)
        return max(1, math.ceil(math.log(lo / mu_ini) / math.log(mu_hat)))


def context_for(anchor: LocalDescentResult, cfg: SolverConfig, n: int) -> FilledContext:
    cfg = cfg.resolved(n)
    return FilledContext(
        anchor=anchor.point,
        anchor_objectives=anchor.objectives,
        mu=cfg.mu_ini,
        mu_hat=cfg.mu_hat,
        mu_L=MU_L_FLOOR,
        mu_U=cfg.mu_U,
        kappa=cfg.kappa,
        epsilon=cfg.epsilon,
        beta_U=cfg.beta_U,
        l=cfg.l,
    )


class _Escape(Exception):
    def __init__(self, y, fy):
        self.y, self.fy = y, fy


def _run_trial(problem, ctx, y, fy, state) -> str:
    """Filled-function descent from one trial point.

    Raises :class:`_Escape` on a strictly improving point. Returns how the
    trial ended: ``"boundary"``, ``"empty"``, ``"mu_underflow"``,
    ``"linesearch"``, ``"cap"`` or ``"stalled"``.
    """
    box = problem.box
    x, fx = ctx.anchor, ctx.anchor_objectives
    for _ in range(MAX_TRIAL_STEPS):
        r = y - x
        dist = float(np.linalg.norm(r))
        if dist == 0.0:
            return "stalled"
        s = r / dist
        J = problem.jacobian(y)
        cls = classify(x, fx, y, s, fy, J)
        mu_L = adaptive_mu_lower(cls, ctx.mu_U)
        state["mu_L"] = mu_L
        state["mu_L_history"].append(mu_L)
        if mu_L >= raw_mu_upper(cls, ctx.mu_U):
            return "empty"
        mu = state["mu"]
        G = _gradient(x, fx, mu, y, fy, J)
        ok, _ = descent_check(replace(ctx, mu=mu), problem, y, fy, J, grad=G)
        reductions = 0
        while not ok:
            mu *= ctx.mu_hat**ctx.l
            reductions += 1
            if reductions > MAX_INNER_REDUCTIONS or mu < MU_UNDERFLOW:
                return "mu_underflow"
            G = _gradient(x, fx, mu, y, fy, J)
            ok, _ = descent_check(replace(ctx, mu=mu), problem, y, fy, J, grad=G)
        state["mu"] = mu
        Fy = _values(x, fx, mu, y, fy)
        lo_before, hi_before = active_bounds(y, box)
        beta = ctx.beta_U
        for _ in range(MAX_BACKTRACKS + 1):
            t = project_to_box(y + beta * s, box)
            if np.array_equal(t, y):
                return "boundary"
            ft = problem.evaluate(t)
            if np.all(_values(x, fx, mu, t, ft) < Fy):
                break
            beta *= 0.5
        else:
            return "linesearch"
        state["steps"] += 1
        if strictly_dominates(ft, fx):
            raise _Escape(t, ft)
        lo_after, hi_after = active_bounds(t, box)
        y, fy = t, ft
        if np.any(lo_after & ~lo_before) or np.any(hi_after & ~hi_before):
            return "boundary"
    return "cap"


def global_phase(
    problem: MopProblem,
    anchor_result: LocalDescentResult,
    ctx: FilledContext,
    cfg: Optional[SolverConfig] = None,
    rng=None,
) -> GlobalOutcome:
    """Search for a point strictly dominating the anchor.

    Each outer round builds ``trial_count_factor * n`` trial points and runs
    filled-function descent from each along ``s = (y - x) / |y - x|``. The
    bounds ``mu_L``/``mu_U`` are refreshed at every iterate; a failed
    descent check shrinks ``mu`` by ``mu_hat**l`` (at most 60 times). After a
    round without success ``mu <- mu_hat * mu``; the attempt ends once
    ``mu < mu_L``. A trial whose ``mu`` shrinking fails keeps the ``mu`` it
    started with.
    """
    cfg = (cfg or SolverConfig()).resolved(problem.n)
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    x, fx = ctx.anchor, ctx.anchor_objectives
    count = cfg.trial_count_factor * problem.n
    state = {"mu": ctx.mu, "mu_L": ctx.mu_L, "mu_L_history": [], "steps": 0}
    rounds = 0
    reason = "max_rounds"
    try:
        while rounds < cfg.max_global_rounds:
            rounds += 1
            trials = make_trial_points(problem, x, ctx.epsilon, count, rng)
            endings = []
            for y in trials:
                fy = problem.evaluate(y)
                if strictly_dominates(fy, fx):
                    raise _Escape(y, fy)
                mu_before = state["mu"]
                ending = _run_trial(problem, ctx, y, fy, state)
                if ending == "mu_underflow":
                    state["mu"] = mu_before
                endings.append(ending)
            state["mu"] *= ctx.mu_hat
            log.debug("round %d: mu=%.3g mu_L=%.3g endings=%s", rounds, state["mu"], state["mu_L"], endings)
            if state["mu"] < state["mu_L"]:
                only_boundary = all(e == "boundary" for e in endings)
                reason = "boundary_exhausted" if only_boundary else "mu_below_mu_L"
                break
    except _Escape as esc:
        return GlobalOutcome(esc.y, esc.fy, "improved", rounds, state["mu_L_history"], state["mu"], state["steps"])
    except BudgetExhausted:
        reason = "budget"
    return GlobalOutcome(None, None, reason, rounds, state["mu_L_history"], state["mu"], state["steps"])


# ---------------------------------------------------------------- full run


@dataclass
class RunReport:
    """Everything a run produced.

    ``trajectories[i]`` lists the anchor objective vectors visited from
    start ``i``; ``rounds[i]`` holds ``(rounds, bound)`` per escape attempt.
    """

    problem: str
    wpf: ParetoArchive
    wpff: ParetoArchive
    pf: ParetoArchive
    pff: ParetoArchive
    evals: int
    grad_evals: int
    local_calls: int
    global_escapes: int
    termination: str
    wall_time: float
    ideal: Optional[np.ndarray]
    nadir: Optional[np.ndarray]
    hv_reference: Optional[np.ndarray]
    config: SolverConfig
    solver: str = "omffm"
    trajectories: list = field(default_factory=list)
    rounds: list = field(default_factory=list)
    local_results: list = field(default_factory=list, repr=False)

    def to_dict(self, include_wall_time: bool = True) -> dict:
        def arch(a: ParetoArchive):
            return [{"x": x.tolist(), "f": f.tolist()} for x, f in a]

        out = {
            "problem": self.problem,
            "solver": self.solver,
            "config": self.config.to_dict(),
            "evals": self.evals,
            "grad_evals": self.grad_evals,
            "local_calls": self.local_calls,
            "global_escapes": self.global_escapes,
            "termination": self.termination,
            "ideal": None if self.ideal is None else self.ideal.tolist(),
            "nadir": None if self.nadir is None else self.nadir.tolist(),
            "hv_reference": None if self.hv_reference is None else self.hv_reference.tolist(),
            "wpf": arch(self.wpf),
            "wpff": arch(self.wpff),
            "pf": arch(self.pf),
            "pff": arch(self.pff),
            "trajectories": [[f.tolist() for f in t] for t in self.trajectories],
        }
        if include_wall_time:
            out["wall_time"] = self.wall_time
        return out


def _empty_archive() -> ParetoArchive:
    return ParetoArchive()


def _run(
    problem: MopProblem,
    cfg: Optional[SolverConfig],
    *,
    use_global: bool,
    eval_hook: Optional[Callable] = None,
) -> RunReport:
    cfg = (cfg or SolverConfig()).resolved(problem.n)
    t0 = time.perf_counter()
    prob = problem.fresh(cfg.eval_budget, eval_hook)
    wpf, wpff = _empty_archive(), _empty_archive()
    ideal = nadir = hv_ref = None
    local_calls = escapes = 0
    trajectories, rounds, locals_ = [], [], []
    reasons = []
    budget_hit = cfg.eval_budget == 0
    if not budget_hit:
        try:
            ideal, nadir = estimate_ideal_nadir(prob, cfg)
            hv_ref = hv_reference_point(ideal, nadir)
        except BudgetExhausted:
            budget_hit = True
    if not budget_hit:
        starts = generate_initial_points(prob, cfg.N, cfg.seed)
        rng = np.random.default_rng([cfg.seed, 0x7F11])
        for y0 in starts:
            res = local_weak_efficient(prob, y0, cfg)
            local_calls += 1
            locals_.append(res)
            budget_hit |= res.status == "budget"
            wpf.add(res.point, res.objectives)
            anchor = res
            path = [anchor.objectives]
            tries = []
            if use_global:
                for _ in range(cfg.max_escapes):
                    if anchor.status == "budget":
                        budget_hit = True
                        break
                    ctx = context_for(anchor, cfg, prob.n)
                    outcome = global_phase(prob, anchor, ctx, cfg, rng)
                    tries.append((outcome.rounds, outcome.round_bound(cfg.mu_ini, cfg.mu_hat)))
                    if not outcome.is_improved:
                        reasons.append(outcome.reason)
                        budget_hit |= outcome.reason == "budget"
                        break
                    escapes += 1
                    anchor = local_weak_efficient(prob, outcome.improved, cfg)
                    local_calls += 1
                    locals_.append(anchor)
                    path.append(anchor.objectives)
            budget_hit |= anchor.status == "budget"
            wpff.add(anchor.point, anchor.objectives)
            trajectories.append(path)
            rounds.append(tries)
            if budget_hit:
                break
    if budget_hit:
        termination = "budget"
    elif reasons and all(r == "boundary_exhausted" for r in reasons):
        termination = "boundary_exhausted"
    else:
        termination = "mu_below_mu_L"
    return RunReport(
        problem=problem.name,
        wpf=wpf,
        wpff=wpff,
        pf=nondominated_filter(wpf),
        pff=nondominated_filter(wpff),
        evals=prob.evals,
        grad_evals=prob.counter.jac_evals,
        local_calls=local_calls,
        global_escapes=escapes,
        termination=termination,
        wall_time=time.perf_counter() - t0,
        ideal=ideal,
        nadir=nadir,
        hv_reference=hv_ref,
        config=cfg,
        solver="omffm" if use_global else "local_only",
        trajectories=trajectories,
        rounds=rounds,
        local_results=locals_,
    )


def run_omffm(problem: MopProblem, cfg: Optional[SolverConfig] = None, *, eval_hook=None) -> RunReport:
    """Full solver: multi-start local descent with filled-function escapes."""
    return _run(problem, cfg, use_global=True, eval_hook=eval_hook)


def run_local_only(problem: MopProblem, cfg: Optional[SolverConfig] = None, *, eval_hook=None) -> RunReport:
    """Baseline without the global phase (WPFF equals WPF)."""
    return _run(problem, cfg, use_global=False, eval_hook=eval_hook)

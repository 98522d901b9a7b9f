"""Local phase: projected multi-objective steepest descent.

At ``y`` the common descent direction solves

    min_d  max_j  grad f_j(y)^T d + 1/2 |d|^2,

whose dual is the minimum-norm point of the convex hull of the gradients.
The optimal value ``theta`` is zero exactly at Pareto-critical points, and
the dual weights ``lambda`` certify criticality through
``sum_j lambda_j grad f_j(y) = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import NamedTuple, Optional

import numpy as np

from omffm.config import SolverConfig
from omffm.core import (
    Box,
    BudgetExhausted,
    NumericalError,
    active_bounds,
    project_to_box,
)
from omffm.problems import MopProblem

C1 = 1e-4
RHO = 0.5
BETA0 = 1.0
K_MAX = 50


class Direction(NamedTuple):
    direction: np.ndarray
    theta: float
    multipliers: np.ndarray


class LineSearchResult(NamedTuple):
    step: float
    point: np.ndarray
    objectives: np.ndarray


@dataclass
class LocalDescentResult:
    point: np.ndarray
    objectives: np.ndarray
    multipliers: np.ndarray
    criticality: float
    iterations: int
    evals: int
    status: str  # "critical", "linesearch", "max_iter" or "budget"
    residual: float
    trace: list = field(default_factory=list, repr=False)

    @property
    def converged(self) -> bool:
        return self.status == "critical"


def _min_norm_simplex(G: np.ndarray) -> np.ndarray:
    """Weights on the simplex minimising ``|G^T lam|``.

    Every support set is tried: on a support the minimiser over its affine
    hull comes from a small KKT system, and feasible candidates compete on
    objective value. Exact for the m <= 3 problems shipped here, and cheap
    up to m ~ 10.
    """
    m = G.shape[0]
    Q = G @ G.T
    best, best_val = None, np.inf
    for size in range(m, 0, -1):
        for S in combinations(range(m), size):
            S = list(S)
            if size == 1:
                lam_s = np.ones(1)
            else:
                K = np.zeros((size + 1, size + 1))
                K[:size, :size] = Q[np.ix_(S, S)]
                K[:size, size] = 1.0
                K[size, :size] = 1.0
                rhs = np.zeros(size + 1)
                rhs[size] = 1.0
                sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
                lam_s = sol[:size]
                if not np.all(np.isfinite(lam_s)) or np.any(lam_s < -1e-12):
                    continue
                lam_s = np.clip(lam_s, 0.0, None)
                total = lam_s.sum()
                if total <= 0:
                    continue
                lam_s /= total
            lam = np.zeros(m)
            lam[S] = lam_s
            v = G.T @ lam
            val = float(v @ v)
            if best is None or val < best_val * (1 - 1e-12):
                best, best_val = lam, val
    if best is None:
        raise NumericalError("direction subproblem has no feasible candidate")
    return best


def steepest_descent_direction(jacobian) -> Direction:
    """Solve ``min_d max_j grad f_j^T d + |d|^2/2`` for a Jacobian ``m x n``.

    Returns ``d = -sum_j lam_j grad f_j``, the optimal value ``theta <= 0``
    and the convex weights ``lam``.
    """
    J = np.asarray(jacobian, dtype=float)
    if not np.all(np.isfinite(J)):
        raise NumericalError("non-finite Jacobian", residual=float("inf"))
    if J.shape[1] == 0:
        m = J.shape[0]
        return Direction(np.zeros(0), 0.0, np.full(m, 1.0 / m))
    lam = _min_norm_simplex(J)
    d = -(J.T @ lam)
    theta = float(np.max(J @ d) + 0.5 * d @ d)
    return Direction(d, theta, lam)


def box_descent_direction(jacobian, y, box: Box) -> Direction:
    """Steepest descent direction with bound-touching coordinates frozen.

    A coordinate at its lower (upper) bound is fixed to zero while the dual
    combination ``v = J^T lam`` would push it outwards. The clip pattern and
    the weights are iterated to a fixed point, which is the optimum of the
    face-constrained subproblem.
    """
    J = np.asarray(jacobian, dtype=float)
    at_lo, at_hi = active_bounds(y, box)
    if not np.any(at_lo | at_hi):
        return steepest_descent_direction(J)
    n = J.shape[1]
    clipped = np.zeros(n, dtype=bool)
    seen: set[bytes] = set()
    for _ in range(2 * n + 10):
        res = steepest_descent_direction(J[:, ~clipped])
        lam = res.multipliers
        v = J.T @ lam
        new = (at_lo & (v > 0)) | (at_hi & (v < 0))
        if np.array_equal(new, clipped) or new.tobytes() in seen:
            break
        seen.add(clipped.tobytes())
        clipped = new
    d = -v
    d[clipped] = 0.0
    theta = float(np.max(J @ d) + 0.5 * d @ d)
    return Direction(d, theta, lam)


def face_polish_direction(jacobian, lam, y, box: Box, tol: float = 1e-8) -> Optional[Direction]:
    """Descent for objectives left out of a weak-criticality certificate.

    At a point where ``lam`` certifies weak criticality, objectives with
    ``lam_j <= tol`` may still decrease. Coordinates on which a certified
    objective pushes against an active bound are pinned; if the certified
    objectives are flat on the remaining coordinates, the face-constrained
    steepest descent direction of the other objectives over those
    coordinates is returned (``None`` otherwise). Moving along it leaves
    the certified objectives unchanged to first order.
    """
    J = np.asarray(jacobian, dtype=float)
    lam = np.asarray(lam, dtype=float)
    A = lam > tol
    if np.all(A):
        return None
    at_lo, at_hi = active_bounds(y, box)
    GA = J[A]
    pinned = np.any((at_lo & (GA > 0)) | (at_hi & (GA < 0)), axis=0)
    free = ~pinned
    if not np.any(free):
        return None
    scale = 1.0 + np.max(np.abs(GA))
    if np.max(np.abs(GA[:, free]), initial=0.0) > tol * scale:
        return None
    sub = Box(box.lower[free], box.upper[free])
    res = box_descent_direction(J[~A][:, free], np.asarray(y, dtype=float)[free], sub)
    d = np.zeros(J.shape[1])
    d[free] = res.direction
    if not np.any(d):
        return None
    return Direction(d, res.theta, res.multipliers)


def criticality_residual(jacobian, multipliers, y, box: Optional[Box] = None) -> float:
    """Norm of ``sum_j lam_j grad f_j``; projected onto the box when given.

    For interior points this is the plain first-order residual. At the
    boundary it is ``|y - P(y - J^T lam)|``, which vanishes when the
    outward-pointing gradient parts are blocked by the bounds.
    """
    v = np.asarray(jacobian, dtype=float).T @ np.asarray(multipliers, dtype=float)
    if box is None:
        return float(np.linalg.norm(v))
    y = np.asarray(y, dtype=float)
    return float(np.linalg.norm(y - project_to_box(y - v, box)))


def armijo_backtrack(
    problem: MopProblem,
    y,
    d,
    theta: float,
    c1: float = C1,
    beta0: float = BETA0,
    *,
    rho: float = RHO,
    k_max: int = K_MAX,
    fy=None,
    hold=None,
) -> Optional[LineSearchResult]:
    """Largest ``beta0 * rho**k`` (k <= k_max) passing the Armijo test for all j.

    The trial point is ``P(y + step * d)`` and the test is
    ``f_j(trial) <= f_j(y) + c1 * step * theta``. Objectives flagged in the
    boolean mask ``hold`` only need ``f_j(trial) <= f_j(y)``. Returns
    ``None`` when no step qualifies.
    """
    y = np.asarray(y, dtype=float)
    d = np.asarray(d, dtype=float)
    fy = problem.evaluate(y) if fy is None else np.asarray(fy, dtype=float)
    slack = np.ones_like(fy) if hold is None else (~np.asarray(hold)).astype(float)
    step = beta0
    for _ in range(k_max + 1):
        trial = project_to_box(y + step * d, problem.box)
        ft = problem.evaluate(trial)
        if np.all(ft <= fy + c1 * step * theta * slack):
            return LineSearchResult(step, trial, ft)
        step *= rho
    return None


def local_weak_efficient(
    problem: MopProblem,
    y0,
    cfg: Optional[SolverConfig] = None,
    *,
    record: bool = False,
    polish: bool = True,
) -> LocalDescentResult:
    """Descend from ``y0`` to a Pareto-critical point of ``problem``.

    Stops when ``|theta| < crit_tol``, when the line search fails, or when
    ``max_local_iters`` is reached. With ``polish`` a weakly critical point
    whose certificate leaves some objectives out is pushed further along
    :func:`face_polish_direction` before being accepted. Budget exhaustion
    after the first evaluation returns the current iterate flagged
    ``"budget"``.
    """
    cfg = (cfg or SolverConfig()).resolved(problem.n)
    box = problem.box
    start = problem.evals
    y = project_to_box(np.asarray(y0, dtype=float), box)
    fy = problem.evaluate(y)
    m = problem.m
    lam = np.full(m, 1.0 / m)
    theta = np.nan
    J = None
    status = "max_iter"
    trace = []
    it = 0
    try:
        while True:
            J = problem.jacobian(y)
            d, theta, lam = box_descent_direction(J, y, box)
            hold = None
            if abs(theta) < cfg.crit_tol:
                face = face_polish_direction(J, lam, y, box) if polish else None
                ls = None
                if face is not None and it < cfg.max_local_iters:
                    hold = lam > 1e-8
                    ls = armijo_backtrack(problem, y, face.direction, face.theta, fy=fy, hold=hold)
                if ls is None:
                    status = "critical"
                    break
            elif it >= cfg.max_local_iters:
                break
            else:
                ls = armijo_backtrack(problem, y, d, theta, fy=fy)
            if ls is None:
                status = "linesearch"
                break
            if record:
                trace.append((y, fy, theta, ls.step, ls.objectives))
            y, fy = ls.point, ls.objectives
            it += 1
    except BudgetExhausted:
        status = "budget"
    residual = np.inf if J is None else criticality_residual(J, lam, y, box)
    return LocalDescentResult(
        point=y,
        objectives=fy,
        multipliers=lam,
        criticality=float(theta),
        iterations=it,
        evals=problem.evals - start,
        status=status,
        residual=residual,
        trace=trace,
    )

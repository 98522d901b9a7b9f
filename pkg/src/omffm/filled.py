"""One-parameter multi-objective filled function.

For an anchor ``x`` (a local weak efficient point) and ``mu > 0``::

    F_j(y) = -|y - x|^2 + phi_mu(f_j(y) - f_j(x))

    phi_nu(t) = -nu t^3      (t >= 0)
              = -t^2 / nu    (t <  0)

Descending on ``F`` moves away from the anchor; components whose objective
already beats the anchor are pulled further down with weight ``1/mu``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from omffm.core import ContractError
from omffm.problems import MopProblem

MU_L_OFFSET = 1e-5
MU_L_FLOOR = 1e-5
SIGN_TOL = 1e-12
EQUAL_RTOL = 1e-10


@dataclass(frozen=True)
class FilledContext:
    """Anchor and parameters of one filled function."""

    anchor: np.ndarray
    anchor_objectives: np.ndarray
    mu: float = 0.01
    mu_hat: float = 0.005
    mu_L: float = MU_L_FLOOR
    mu_U: float = 1.0
    kappa: float = 1e-4
    epsilon: float = 0.1
    beta_U: float = 0.1
    l: int = 1

    def __post_init__(self):
        object.__setattr__(self, "anchor", np.array(self.anchor, dtype=float))
        object.__setattr__(self, "anchor_objectives", np.array(self.anchor_objectives, dtype=float))
        if not 0 < self.mu_hat < 1:
            raise ContractError("need 0 < mu_hat < 1")
        if not (0 < self.mu <= self.mu_U <= 1):
            raise ContractError("need 0 < mu <= mu_U <= 1")
        if min(self.mu_L, self.kappa, self.epsilon, self.beta_U) <= 0 or self.l < 1:
            raise ContractError("mu_L, kappa, epsilon, beta_U must be positive and l >= 1")


def _check_nu(nu: float) -> None:
    if not nu > 0:
        raise ContractError(f"phi needs nu > 0, got {nu}")


def phi(nu: float, t):
    _check_nu(nu)
    t = np.asarray(t, dtype=float)
    out = np.where(t >= 0, -nu * t**3, -(t**2) / nu)
    return out if out.ndim else float(out)


def phi_prime(nu: float, t):
    _check_nu(nu)
    t = np.asarray(t, dtype=float)
    out = np.where(t >= 0, -3 * nu * t**2, -2 * t / nu)
    return out if out.ndim else float(out)


def _values(anchor, f_anchor, mu, y, fy) -> np.ndarray:
    r = np.asarray(y, dtype=float) - anchor
    return -(r @ r) + phi(mu, np.asarray(fy, dtype=float) - f_anchor)


def _gradient(anchor, f_anchor, mu, y, fy, jy) -> np.ndarray:
    r = np.asarray(y, dtype=float) - anchor
    dphi = phi_prime(mu, np.asarray(fy, dtype=float) - f_anchor)
    return -2 * r[None, :] + np.atleast_1d(dphi)[:, None] * np.asarray(jy, dtype=float)


def filled_value(ctx: FilledContext, problem: MopProblem, y, fy=None) -> np.ndarray:
    fy = problem.evaluate(y) if fy is None else fy
    return _values(ctx.anchor, ctx.anchor_objectives, ctx.mu, y, fy)


def filled_gradient(ctx: FilledContext, problem: MopProblem, y, fy=None, jy=None) -> np.ndarray:
    """Row ``j`` is ``-2 (y - x) + phi_mu'(f_j(y) - f_j(x)) grad f_j(y)``."""
    fy = problem.evaluate(y) if fy is None else fy
    jy = problem.jacobian(y) if jy is None else jy
    return _gradient(ctx.anchor, ctx.anchor_objectives, ctx.mu, y, fy, jy)


@dataclass(frozen=True)
class IndexClasses:
    """Partition of objective indices at ``ybar`` relative to the anchor.

    ``equal``/``worse``/``better`` compare ``f_j(ybar)`` with ``f_j(x)``.
    ``worse_falling`` (P3) are worse indices with ``s^T grad f_j < 0``;
    ``better_rising`` (Q2) are better indices with ``s^T grad f_j > 0``.
    """

    delta: np.ndarray
    slope: np.ndarray
    equal: np.ndarray
    worse: np.ndarray
    better: np.ndarray
    worse_falling: np.ndarray
    better_rising: np.ndarray
    radial: float


def classify(anchor, f_anchor, ybar, s, fy, jy) -> IndexClasses:
    ybar = np.asarray(ybar, dtype=float)
    s = np.asarray(s, dtype=float)
    radial = float(s @ (ybar - anchor))
    if not radial > 0:
        raise ContractError("need s^T (ybar - anchor) > 0")
    delta = np.asarray(fy, dtype=float) - f_anchor
    slope = np.asarray(jy, dtype=float) @ s
    equal = np.abs(delta) <= EQUAL_RTOL * np.maximum(1.0, np.abs(f_anchor))
    worse = ~equal & (delta > 0)
    better = ~equal & (delta < 0)
    return IndexClasses(
        delta=delta,
        slope=slope,
        equal=equal,
        worse=worse,
        better=better,
        worse_falling=worse & (slope < -SIGN_TOL),
        better_rising=better & (slope > SIGN_TOL),
        radial=radial,
    )


def raw_mu_lower(cls: IndexClasses) -> float:
    """``max(0, max_{Q2} -delta_i * slope_i / radial)``, no offset."""
    if not np.any(cls.better_rising):
        return 0.0
    q = cls.better_rising
    return max(0.0, float(np.max(-cls.delta[q] * cls.slope[q])) / cls.radial)


def raw_mu_upper(cls: IndexClasses, cap: float = 1.0) -> float:
    """``min(cap, 2 radial / max_{P3} -3 delta_i^2 slope_i)``; ``cap`` if P3 is empty."""
    if not np.any(cls.worse_falling):
        return cap
    p = cls.worse_falling
    denom = float(np.max(-3 * cls.delta[p] ** 2 * cls.slope[p]))
    return min(cap, 2 * cls.radial / denom)


def adaptive_mu_lower(cls: IndexClasses, mu_U: float = 1.0) -> float:
    """Lower bound used by the solver: raw bound plus ``1e-5``, reset to
    ``1e-5`` when Q2 is empty or the value reaches ``mu_U``."""
    if not np.any(cls.better_rising):
        return MU_L_FLOOR
    value = raw_mu_lower(cls) + MU_L_OFFSET
    return value if value < mu_U else MU_L_FLOOR


def _classes(ctx, problem, ybar, s, fy, jy) -> IndexClasses:
    fy = problem.evaluate(ybar) if fy is None else fy
    jy = problem.jacobian(ybar) if jy is None else jy
    return classify(ctx.anchor, ctx.anchor_objectives, ybar, s, fy, jy)


def mu_lower(ctx: FilledContext, problem: MopProblem, ybar, s, fy=None, jy=None) -> float:
    return adaptive_mu_lower(_classes(ctx, problem, ybar, s, fy, jy), ctx.mu_U)


def mu_upper(ctx: FilledContext, problem: MopProblem, ybar, s, fy=None, jy=None) -> float:
    return raw_mu_upper(_classes(ctx, problem, ybar, s, fy, jy), ctx.mu_U)


def admissible_interval(ctx, problem, ybar, s=None, fy=None, jy=None) -> tuple[float, float]:
    """Open interval ``(mu_L, mu_U)`` on which ``s`` descends every ``F_j``.

    ``s`` defaults to ``ybar - anchor``. The bounds carry no offset.
    """
    ybar = np.asarray(ybar, dtype=float)
    s = ybar - ctx.anchor if s is None else s
    cls = _classes(ctx, problem, ybar, s, fy, jy)
    return raw_mu_lower(cls), raw_mu_upper(cls, ctx.mu_U)


def descent_check(ctx: FilledContext, problem: MopProblem, y, fy=None, jy=None, grad=None):
    """``(ok, j)``: every ``F_j`` has ``|grad| >= kappa`` and descends along ``y - x``.

    ``j`` is the first failing index, or ``None`` when ``ok``.
    """
    y = np.asarray(y, dtype=float)
    r = y - ctx.anchor
    if not np.any(r):
        raise ContractError("descent_check needs y != anchor")
    G = filled_gradient(ctx, problem, y, fy, jy) if grad is None else grad
    norms = np.linalg.norm(G, axis=1)
    radial = G @ r
    bad = np.flatnonzero((norms < ctx.kappa) | (radial >= 0))
    return (True, None) if bad.size == 0 else (False, int(bad[0]))


def reduce_mu(ctx: FilledContext, l: Optional[int] = None) -> FilledContext:
    """``mu <- mu_hat**l * mu`` (``l`` defaults to ``ctx.l``)."""
    l = ctx.l if l is None else l
    return replace(ctx, mu=ctx.mu * ctx.mu_hat**l)

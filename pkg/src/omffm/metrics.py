"""Front-quality indicators and Dolan-More performance profiles.

Definitions used throughout:

* purity: share of a front's points that survive in the non-dominated
  filtration of the union of all competing fronts;
* Gamma: the largest gap between neighbours when the front is sorted along
  an objective axis (maximised over axes, Euclidean gap length);
* Delta: ``(d_f + d_l + sum |d_i - mean d|) / (d_f + d_l + (N-1) mean d)``
  with ``d_i`` the N-1 neighbour gaps along ``f_1`` and ``d_f``/``d_l`` the
  distances from the given extremes to the first/last point (m = 2 only);
* hypervolume: Lebesgue measure dominated by the front inside the box
  bounded by a reference point (exact for m = 2, 3).
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from omffm.core import DEDUP_TOL, ContractError, _as_records, dedup_mask, nondominated_mask

log = logging.getLogger(__name__)

INF = float("inf")
PROFILE_EPS = 1e-12


def _front(front) -> np.ndarray:
    if isinstance(front, np.ndarray) and front.ndim == 2:
        return front.astype(float)
    records = _as_records(front)
    if not records:
        return np.zeros((0, 0))
    return np.array([f for _, f in records], dtype=float)


# ---------------------------------------------------------------- purity


def purity(front, all_fronts: Sequence, tol: float = DEDUP_TOL) -> float:
    """``|front & R| / |front|`` with ``R`` the non-dominated union of ``all_fronts``."""
    A = _front(front)
    if len(A) == 0:
        return 0.0
    members = [_front(f) for f in all_fronts]
    U = np.vstack([M for M in members if len(M)] or [A])
    R = U[nondominated_mask(U)]
    hits = sum(bool(np.any(np.max(np.abs(R - a), axis=1) <= tol)) for a in A)
    return hits / len(A)


# ---------------------------------------------------------------- spread


def gamma_spread(front) -> float:
    """Largest neighbour gap, maximised over sorting axes; ``inf`` below 2 points."""
    F = _front(front)
    if len(F):
        F = F[dedup_mask(F)]
    if len(F) < 2:
        return INF
    best = 0.0
    for axis in range(F.shape[1]):
        S = F[np.argsort(F[:, axis], kind="stable")]
        best = max(best, float(np.max(np.linalg.norm(np.diff(S, axis=0), axis=1))))
    return best


def delta_spread(front, extremes) -> float:
    """Gap-uniformity measure for bi-objective fronts; ``inf`` below 2 points."""
    F = _front(front)
    if len(F) and F.shape[1] != 2:
        raise ContractError("delta_spread is defined for m = 2")
    if len(F) < 2:
        return INF
    F = F[np.argsort(F[:, 0], kind="stable")]
    first, last = (np.asarray(e, dtype=float) for e in extremes)
    if first[0] > last[0]:
        first, last = last, first
    gaps = np.linalg.norm(np.diff(F, axis=0), axis=1)
    mean = float(gaps.mean())
    d_f = float(np.linalg.norm(F[0] - first))
    d_l = float(np.linalg.norm(F[-1] - last))
    denom = d_f + d_l + len(gaps) * mean
    if denom == 0:
        return 0.0
    return (d_f + d_l + float(np.sum(np.abs(gaps - mean)))) / denom


# ---------------------------------------------------------------- hypervolume


def _hv2(F: np.ndarray, ref: np.ndarray) -> float:
    F = F[np.lexsort((F[:, 1], F[:, 0]))]
    total, best2 = 0.0, ref[1]
    for f1, f2 in F:
        if f2 < best2:
            total += (ref[0] - f1) * (best2 - f2)
            best2 = f2
    return total


def _hv3(F: np.ndarray, ref: np.ndarray) -> float:
    F = F[np.argsort(F[:, 2], kind="stable")]
    levels = np.append(F[:, 2], ref[2])
    total = 0.0
    for k in range(len(F)):
        height = levels[k + 1] - levels[k]
        if height > 0:
            total += height * _hv2(F[: k + 1, :2], ref[:2])
    return total


def hypervolume(front, reference) -> float:
    """Exact dominated hypervolume for m = 2 (sweep) or m = 3 (slices over f_3).

    Points not strictly below the reference in every component are dropped
    with a warning.
    """
    ref = np.asarray(reference, dtype=float)
    F = _front(front)
    if len(F) == 0:
        return 0.0
    if F.shape[1] != ref.size:
        raise ContractError("reference point and front disagree on m")
    if ref.size not in (2, 3):
        raise ContractError("hypervolume supports m = 2 or 3")
    keep = np.all(F < ref, axis=1)
    if not np.all(keep):
        warnings.warn(f"{int(np.sum(~keep))} point(s) outside the reference box ignored", RuntimeWarning, stacklevel=2)
        F = F[keep]
    if len(F) == 0:
        return 0.0
    return _hv2(F, ref) if ref.size == 2 else _hv3(F, ref)


# ---------------------------------------------------------------- reports


@dataclass
class MetricsReport:
    purity: float
    delta_spread: float
    gamma_spread: float
    hypervolume: float
    evals: int

    def to_dict(self) -> dict:
        return asdict(self)


def front_metrics(front, all_fronts, reference, extremes=None, evals: int = 0) -> MetricsReport:
    """All indicators for one front; Delta is ``inf`` unless m = 2 and
    extremes are given."""
    F = _front(front)
    if extremes is not None and (len(F) == 0 or F.shape[1] == 2):
        delta = delta_spread(F, extremes)
    else:
        delta = INF
    return MetricsReport(
        purity=purity(F, all_fronts),
        delta_spread=delta,
        gamma_spread=gamma_spread(F),
        hypervolume=hypervolume(F, reference),
        evals=int(evals),
    )


def front_extremes(front) -> tuple[np.ndarray, np.ndarray]:
    """Endpoints of a bi-objective front (min ``f_1`` and min ``f_2``)."""
    F = _front(front)
    return F[np.argmin(F[:, 0])], F[np.argmin(F[:, 1])]


# ---------------------------------------------------------------- profiles


@dataclass
class ProfileCurve:
    solver: str
    taus: np.ndarray
    rhos: np.ndarray

    def at(self, tau: float) -> float:
        """``rho(tau)`` of the right-continuous step function."""
        idx = np.searchsorted(self.taus, tau, side="right") - 1
        return 0.0 if idx < 0 else float(self.rhos[idx])


def performance_ratios(values, failure_mask=None) -> np.ndarray:
    """``r[p, s] = v[p, s] / min_s' v[p, s']``; failed cells are ``inf``.

    Rows in which every solver failed are dropped with a warning.
    """
    V = np.asarray(values, dtype=float)
    if V.ndim != 2:
        raise ContractError("values must be problems x solvers")
    failed = np.zeros(V.shape, dtype=bool) if failure_mask is None else np.asarray(failure_mask, dtype=bool)
    failed = failed | ~np.isfinite(V)
    if np.any(V[~failed] <= 0):
        raise ContractError("profile values must be positive")
    dead = np.all(failed, axis=1)
    if np.any(dead):
        warnings.warn(f"dropping {int(dead.sum())} problem(s) with no finite value for any solver", RuntimeWarning, stacklevel=2)
        V, failed = V[~dead], failed[~dead]
    best = np.min(np.where(failed, INF, V), axis=1, keepdims=True)
    return np.where(failed, INF, V / best)


def performance_profile(values, failure_mask=None, solvers: Sequence[str] | None = None) -> list[ProfileCurve]:
    """Dolan-More curves ``rho_s(tau) = |{p : r[p, s] <= tau}| / |P|``.

    Every curve is evaluated at ``tau = 1`` and at each finite ratio of the
    whole table, sorted ascending. Lower values are better.
    """
    R = performance_ratios(values, failure_mask)
    P, S = R.shape
    names = list(solvers) if solvers is not None else [f"s{k + 1}" for k in range(S)]
    if len(names) != S:
        raise ContractError("one name per solver column")
    finite = R[np.isfinite(R)]
    taus = np.unique(np.concatenate([[1.0], finite]))
    curves = []
    for s in range(S):
        col = np.sort(R[:, s])
        rhos = np.searchsorted(col, taus, side="right") / P if P else np.zeros_like(taus)
        curves.append(ProfileCurve(names[s], taus, rhos.astype(float)))
    return curves


def profile_scores(metric: str, values) -> np.ndarray:
    """Turn a metric table into lower-is-better profile inputs.

    purity and hypervolume are maximised, so they map to ``1/(v + 1e-12)``.
    """
    V = np.asarray(values, dtype=float)
    if metric in ("purity", "hypervolume"):
        return 1.0 / (V + PROFILE_EPS)
    return V


def format_profile_csv(curves: Sequence[ProfileCurve]) -> str:
    if not curves:
        return "tau\n"
    lines = ["tau," + ",".join(c.solver for c in curves)]
    for k, tau in enumerate(curves[0].taus):
        lines.append(",".join([format(float(tau), ".17g")] + [format(float(c.rhos[k]), ".17g") for c in curves]))
    return "\n".join(lines) + "\n"

"""Order relations, box geometry, Pareto archives and finite differences.

Everything here works on plain numpy arrays: a decision vector is a 1-D
float array of length ``n`` and an objective vector a 1-D float array of
length ``m``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Iterator

import numpy as np

if TYPE_CHECKING:
    from omffm.problems import MopProblem

DEDUP_TOL = 1e-10
BOUNDARY_RTOL = 1e-8


class OmffmError(Exception):
    """Base class for errors raised by this package."""


class ContractError(OmffmError, ValueError):
    """An operation was called with arguments violating its precondition."""


class EvaluationError(OmffmError):
    """An objective evaluation produced a non-finite value."""

    def __init__(self, message: str, point: np.ndarray | None = None):
        super().__init__(message)
        self.point = None if point is None else np.array(point, dtype=float)


class DomainError(OmffmError, ValueError):
    """A point outside the feasible box was passed to an objective."""


class BudgetExhausted(OmffmError):
    """The evaluation budget of a run has been used up."""


class CapabilityError(OmffmError):
    """The problem lacks an optional capability (gradients, front sampler)."""


class NumericalError(OmffmError, ArithmeticError):
    """An inner numerical routine failed to produce a usable answer."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class ConfigurationError(OmffmError, ValueError):
    """Solver parameters are inconsistent with the problem."""


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ContractError(f"objective vectors differ in shape: {a.shape} vs {b.shape}")
    return a, b


def strictly_dominates(a, b) -> bool:
    """True iff ``a[j] < b[j]`` for every component."""
    a, b = _pair(a, b)
    return bool(np.all(a < b))


def dominates(a, b) -> bool:
    """Pareto dominance: ``a <= b`` componentwise and ``a != b``."""
    a, b = _pair(a, b)
    return bool(np.all(a <= b) and np.any(a < b))


def nondominated_mask(F) -> np.ndarray:
    """Boolean mask of the rows of ``F`` not dominated by any other row.

    Exact comparisons, no tolerance. Identical rows do not dominate each
    other, so duplicates survive together; deduplication is separate.
    """
    F = np.asarray(F, dtype=float)
    k = len(F)
    if k == 0:
        return np.zeros(0, dtype=bool)
    if F.shape[1] == 2:
        return _nondominated_mask_2d(F)
    keep = np.ones(k, dtype=bool)
    chunk = max(1, int(4_000_000 // max(k * F.shape[1], 1)))
    for start in range(0, k, chunk):
        block = F[start : start + chunk]
        le = np.all(F[None, :, :] <= block[:, None, :], axis=2)
        lt = np.any(F[None, :, :] < block[:, None, :], axis=2)
        keep[start : start + chunk] = ~np.any(le & lt, axis=1)
    return keep


def _nondominated_mask_2d(F: np.ndarray) -> np.ndarray:
    order = np.lexsort((F[:, 1], F[:, 0]))
    keep = np.ones(len(F), dtype=bool)
    best_f2 = np.inf  # min f2 over strictly earlier distinct points
    i = 0
    while i < len(order):
        j = i
        p = F[order[i]]
        while j < len(order) and np.array_equal(F[order[j]], p):
            j += 1
        if best_f2 <= p[1]:
            keep[order[i:j]] = False
        best_f2 = min(best_f2, p[1])
        i = j
    return keep


def dedup_mask(F, tol: float = DEDUP_TOL) -> np.ndarray:
    """Mask keeping the first of every group of rows within ``tol`` (inf-norm)."""
    F = np.asarray(F, dtype=float)
    keep = np.ones(len(F), dtype=bool)
    for i in range(1, len(F)):
        prev = F[:i][keep[:i]]
        if len(prev) and np.any(np.max(np.abs(prev - F[i]), axis=1) <= tol):
            keep[i] = False
    return keep


@dataclass(frozen=True)
class Box:
    """Axis-aligned feasible set ``lower <= y <= upper``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float).reshape(-1)
        hi = np.array(self.upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise ContractError("box bounds differ in length")
        if not np.all(lo < hi):
            raise ContractError("box must have nonempty interior (lower < upper)")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, n: int, lo: float, hi: float) -> "Box":
        return cls(np.full(n, lo), np.full(n, hi))

    @property
    def n(self) -> int:
        return len(self.lower)

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.width))

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains(self, y) -> bool:
        y = np.asarray(y, dtype=float)
        return bool(np.all(y >= self.lower) and np.all(y <= self.upper))


def project_to_box(y, box: Box) -> np.ndarray:
    """Clamp every coordinate of ``y`` into the box (Euclidean projection)."""
    y = np.asarray(y, dtype=float)
    if y.shape != box.lower.shape:
        raise ContractError(f"point has shape {y.shape}, box has dimension {box.n}")
    return np.clip(y, box.lower, box.upper)


def boundary_tol(box: Box) -> np.ndarray:
    return BOUNDARY_RTOL * box.width


def active_bounds(y, box: Box, tol=None) -> tuple[np.ndarray, np.ndarray]:
    """Masks of coordinates sitting at the lower and at the upper bound."""
    y = np.asarray(y, dtype=float)
    tol = boundary_tol(box) if tol is None else tol
    return y <= box.lower + tol, y >= box.upper - tol


def on_boundary(y, box: Box, tol=None) -> bool:
    """True iff some coordinate lies within ``tol`` of its bound.

    ``tol`` defaults to ``1e-8 * (upper - lower)`` per coordinate.
    """
    lo, hi = active_bounds(y, box, tol)
    return bool(np.any(lo | hi))


def finite_diff_jacobian(problem: "MopProblem", y, h: float | None = None) -> np.ndarray:
    """Central-difference Jacobian ``J[j, i] ~ d f_j / d y_i``.

    Near a bound, where ``y +- h`` would leave the box, a one-sided
    difference is used instead. With ``h=None`` the step is
    ``1e-6 * max(1, |y_i|)`` per coordinate. Probes are counted as
    evaluations of ``problem``.
    """
    y = np.asarray(y, dtype=float)
    box = problem.box
    if h is None:
        steps = 1e-6 * np.maximum(1.0, np.abs(y))
    else:
        steps = np.full(y.shape, float(h))
    f0 = None
    J = np.empty((problem.m, problem.n))
    for i in range(problem.n):
        hi_ok = y[i] + steps[i] <= box.upper[i]
        lo_ok = y[i] - steps[i] >= box.lower[i]
        e = np.zeros_like(y)
        e[i] = steps[i]
        if hi_ok and lo_ok:
            fp = _probe(problem, y + e)
            fm = _probe(problem, y - e)
            J[:, i] = (fp - fm) / (2 * steps[i])
            continue
        if f0 is None:
            f0 = _probe(problem, y)
        if hi_ok:
            J[:, i] = (_probe(problem, y + e) - f0) / steps[i]
        else:
            J[:, i] = (f0 - _probe(problem, y - e)) / steps[i]
    return J


def _probe(problem: "MopProblem", y: np.ndarray) -> np.ndarray:
    f = problem.evaluate(y)
    if not np.all(np.isfinite(f)):
        raise EvaluationError("non-finite objective value while differencing", y)
    return f


@dataclass
class ParetoArchive:
    """Decision/objective records, deduplicated on the objective vector.

    ``filtered`` marks archives produced by :func:`nondominated_filter`.
    """

    entries: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    filtered: bool = False
    dedup_tol: float = DEDUP_TOL

    def add(self, x, f) -> bool:
        """Append a record unless its objective vector is already present."""
        f = np.array(f, dtype=float)
        x = np.array([] if x is None else x, dtype=float)
        for _, g in self.entries:
            if g.shape == f.shape and np.max(np.abs(g - f)) <= self.dedup_tol:
                return False
        self.entries.append((x, f))
        if self.filtered:
            self.filtered = False
        return True

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        return iter(self.entries)

    @property
    def objectives(self) -> np.ndarray:
        if not self.entries:
            return np.zeros((0, 0))
        return np.array([f for _, f in self.entries])

    @property
    def points(self) -> np.ndarray:
        if not self.entries:
            return np.zeros((0, 0))
        return np.array([x for x, _ in self.entries])


def nondominated_filter(entries) -> ParetoArchive:
    """Keep the entries no other entry dominates, in their original order.

    ``entries`` is a :class:`ParetoArchive`, an iterable of ``(x, f)``
    pairs, or a 2-D array-like of objective vectors. Duplicate objective
    vectors (within the archive tolerance) collapse to their first
    occurrence.
    """
    records = _as_records(entries)
    out = ParetoArchive(filtered=True)
    if not records:
        return out
    F = np.array([f for _, f in records])
    idx = np.flatnonzero(nondominated_mask(F))
    idx = idx[dedup_mask(F[idx])]
    out.entries = [records[i] for i in idx]
    return out


def _as_records(entries) -> list[tuple[np.ndarray, np.ndarray]]:
    if isinstance(entries, ParetoArchive):
        return list(entries.entries)
    items = list(entries) if not isinstance(entries, np.ndarray) else list(entries)
    if not items:
        return []
    first = items[0]
    if isinstance(first, tuple) and len(first) == 2 and np.ndim(first[1]) == 1:
        return [(np.asarray(x, dtype=float), np.asarray(f, dtype=float)) for x, f in items]
    return [(np.zeros(0), np.asarray(f, dtype=float)) for f in items]


def iter_objectives(fronts: Iterable) -> Iterator[np.ndarray]:
    for front in fronts:
        for _, f in _as_records(front):
            yield f

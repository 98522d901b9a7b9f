"""Box-constrained benchmark problems with analytic Jacobians.

The registry holds the P1-P6 families, ZDT1-3, DTLZ1/DTLZ2 in their bi- and
tri-objective sizes, and two strictly convex toys. Problems are built by
factories so every :func:`get_problem` call gets its own evaluation counter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from omffm.core import (
    Box,
    BudgetExhausted,
    CapabilityError,
    DomainError,
    finite_diff_jacobian,
    nondominated_mask,
    dedup_mask,
)

PI = math.pi


class EvalCounter:
    """Per-run evaluation counter with an optional budget and audit hook."""

    def __init__(self, budget: Optional[int] = None, hook: Optional[Callable] = None):
        self.evals = 0
        self.jac_evals = 0
        self.budget = budget
        self.hook = hook

    def tick(self, y: np.ndarray) -> None:
        if self.budget is not None and self.evals >= self.budget:
            raise BudgetExhausted(f"evaluation budget of {self.budget} exhausted")
        self.evals += 1
        if self.hook is not None:
            self.hook(y)


@dataclass(frozen=True)
class MopProblem:
    """A box-constrained multi-objective problem ``min F(y), y in box``.

    ``objectives`` maps a decision vector to an objective vector,
    ``jacobian`` (optional) to the ``m x n`` Jacobian, and
    ``front_sampler`` (optional) a count to an array of objective vectors on
    the global Pareto front.
    """

    name: str
    n: int
    m: int
    box: Box
    objectives: Callable[[np.ndarray], np.ndarray]
    jacobian_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    front_sampler: Optional[Callable[[int], np.ndarray]] = None
    description: str = ""
    counter: EvalCounter = field(default_factory=EvalCounter, compare=False, repr=False)

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("a multi-objective problem needs m >= 2")
        if self.box.n != self.n:
            raise ValueError(f"box dimension {self.box.n} != n={self.n}")

    def fresh(self, budget: Optional[int] = None, hook: Optional[Callable] = None) -> "MopProblem":
        """Same definition with a new counter."""
        return replace(self, counter=EvalCounter(budget, hook))

    @property
    def evals(self) -> int:
        return self.counter.evals

    @property
    def has_jacobian(self) -> bool:
        return self.jacobian_fn is not None

    def evaluate(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape != (self.n,):
            raise DomainError(f"{self.name}: expected a point of length {self.n}, got {y.shape}")
        if not self.box.contains(y):
            raise DomainError(f"{self.name}: point outside the box; project it first")
        self.counter.tick(y)
        return np.asarray(self.objectives(y), dtype=float)

    def jacobian(self, y) -> np.ndarray:
        """Analytic Jacobian when available, else central finite differences."""
        y = np.asarray(y, dtype=float)
        if not self.box.contains(y):
            raise DomainError(f"{self.name}: point outside the box; project it first")
        self.counter.jac_evals += 1
        if self.jacobian_fn is None:
            return finite_diff_jacobian(self, y)
        return np.asarray(self.jacobian_fn(y), dtype=float)


def evaluate(problem: MopProblem, y) -> np.ndarray:
    return problem.evaluate(y)


def analytic_jacobian(problem: MopProblem, y) -> np.ndarray:
    if problem.jacobian_fn is None:
        raise CapabilityError(f"{problem.name} has no analytic Jacobian")
    y = np.asarray(y, dtype=float)
    if not problem.box.contains(y):
        raise DomainError(f"{problem.name}: point outside the box")
    return np.asarray(problem.jacobian_fn(y), dtype=float)


def sample_true_front(problem: MopProblem, count: int) -> np.ndarray:
    """``count`` mutually non-dominated points on the global front."""
    if problem.front_sampler is None:
        raise CapabilityError(f"{problem.name} has no true-front sampler")
    if count < 1:
        raise ValueError("count must be positive")
    return problem.front_sampler(int(count))


# ---------------------------------------------------------------- helpers


def _front_of(F: np.ndarray) -> np.ndarray:
    """Non-dominated, lexicographically sorted, deduplicated rows of ``F``."""
    F = F[nondominated_mask(F)]
    F = F[np.lexsort(F.T[::-1])]
    return F[dedup_mask(F)] if len(F) <= 5000 else F[_fast_dedup(F)]


def _pick(F: np.ndarray, count: int) -> np.ndarray:
    if len(F) <= count:
        return F
    idx = np.unique(np.round(np.linspace(0, len(F) - 1, count)).astype(int))
    return F[idx]


def _thin(F: np.ndarray, count: int) -> np.ndarray:
    """Filter candidates to the non-dominated set and pick ``count`` of them."""
    return _pick(_front_of(F), count)


def _fast_dedup(F: np.ndarray) -> np.ndarray:
    keep = np.ones(len(F), dtype=bool)
    keep[1:] = np.any(np.abs(np.diff(F, axis=0)) > 1e-10, axis=1)
    return keep


_DENSE_FRONTS: dict[tuple[str, int], np.ndarray] = {}


def _curve_front(key: str, curve: Callable[[np.ndarray], np.ndarray], count: int, dense: int = 200_001):
    """Front of a curve ``t -> F(t)``, ``t`` in [0, 1], thinned to ``count`` points.

    The filtered dense sample is cached under ``key``; curves sharing a key
    must be identical.
    """
    size = max(dense, 20 * count)
    if (key, size) not in _DENSE_FRONTS:
        _DENSE_FRONTS[(key, size)] = _front_of(curve(np.linspace(0.0, 1.0, size)))
    return _pick(_DENSE_FRONTS[(key, size)], count)


def _simplex_grid(count: int) -> np.ndarray:
    """Points ``(u, v, w)`` on the unit 2-simplex, at least ``count`` of them."""
    h = 1
    while (h + 1) * (h + 2) // 2 < count:
        h += 1
    pts = [(i / h, j / h, (h - i - j) / h) for i in range(h + 1) for j in range(h + 1 - i)]
    return np.array(pts)


# ---------------------------------------------------------------- P1..P6


def _p1(n: int = 5) -> MopProblem:
    c = np.array([1.0, -1.0, 2.0, -3.0, 0.0])

    def f(y):
        s2 = y * y
        return np.array([c @ s2, np.sum(s2 * s2) - np.sum(s2)])

    def jac(y):
        return np.vstack([2 * c * y, 4 * y**3 - 2 * y])

    def front(count):
        # In a = y**2 the problem is convex: f1 linear, f2 separable convex.
        # Weighted sums with u = w / (1 - w) in [0, 1] sweep the whole front.
        u = np.linspace(0.0, 1.0, max(20 * count, 20001))
        a = np.clip(0.5 - 0.5 * u[:, None] * c[None, :], 0.0, 1.0)
        F = np.column_stack([a @ c, np.sum(a * a - a, axis=1)])
        return _thin(F, count)

    return MopProblem("P1", n, 2, Box.cube(n, -1.0, 1.0), f, jac, front, "quartic/quadratic, m=2")


def _p2(n: int = 40) -> MopProblem:
    def f(y):
        g = np.sum((y[1:] - 0.5) ** 2)
        a = 0.5 * PI * y[0]
        return (1 + g) * np.array([math.cos(a), math.sin(a)])

    def jac(y):
        g = np.sum((y[1:] - 0.5) ** 2)
        a = 0.5 * PI * y[0]
        J = np.empty((2, n))
        J[0, 0] = -(1 + g) * 0.5 * PI * math.sin(a)
        J[1, 0] = (1 + g) * 0.5 * PI * math.cos(a)
        J[0, 1:] = 2 * (y[1:] - 0.5) * math.cos(a)
        J[1, 1:] = 2 * (y[1:] - 0.5) * math.sin(a)
        return J

    def front(count):
        a = 0.5 * PI * np.linspace(0.0, 1.0, count)
        return np.column_stack([np.cos(a), np.sin(a)])

    return MopProblem("P2", n, 2, Box.cube(n, 0.0, 1.0), f, jac, front, "quarter circle, m=2")


def _p3(n: int = 7) -> MopProblem:
    def parts(t):
        s, c = np.sin(10 * PI * t), np.cos(10 * PI * t)
        return t * (1 + 0.2 * s), (1 - t) * (1 + 0.2 * c)

    def f(y):
        g = np.sum((y[1:] - 0.5) ** 2)
        a, b = parts(y[0])
        return (1 + g) * np.array([a, b])

    def jac(y):
        t = y[0]
        g = np.sum((y[1:] - 0.5) ** 2)
        a, b = parts(t)
        s, c = math.sin(10 * PI * t), math.cos(10 * PI * t)
        da = 1 + 0.2 * s + t * 2 * PI * c
        db = -(1 + 0.2 * c) - (1 - t) * 2 * PI * s
        J = np.empty((2, n))
        J[:, 0] = (1 + g) * np.array([da, db])
        J[0, 1:] = a * 2 * (y[1:] - 0.5)
        J[1, 1:] = b * 2 * (y[1:] - 0.5)
        return J

    def front(count):
        return _curve_front("P3", lambda t: np.column_stack(parts(t)), count)

    return MopProblem("P3", n, 2, Box.cube(n, 0.0, 1.0), f, jac, front, "wavy front, m=2")


def _p4(name: str, n: int) -> MopProblem:
    k = 4.0 / (n - 1)

    def f(y):
        t = y[0]
        g = 1 + k * np.sum(y[1:] ** 2)
        return np.array([t, g * (1 - (t / g) ** 2 - 0.3 * t * math.sin(10 * PI * t))])

    def jac(y):
        t = y[0]
        g = 1 + k * np.sum(y[1:] ** 2)
        s, c = math.sin(10 * PI * t), math.cos(10 * PI * t)
        J = np.zeros((2, n))
        J[0, 0] = 1.0
        # f2 = g - t^2/g - 0.3 t g sin(10 pi t)
        J[1, 0] = -2 * t / g - 0.3 * g * (s + 10 * PI * t * c)
        dg = 2 * k * y[1:]
        J[1, 1:] = (1 + t * t / (g * g) - 0.3 * t * s) * dg
        return J

    def front(count):
        # f2 increases with g, so the front lives on g = 1.
        return _curve_front(
            "P4", lambda t: np.column_stack([t, 1 - t * t - 0.3 * t * np.sin(10 * PI * t)]), count
        )

    return MopProblem(name, n, 2, Box.cube(n, 0.0, 1.0), f, jac, front, "disconnected front, m=2")


def _p5(name: str, n: int) -> MopProblem:
    k = 3.0 / (n - 1)

    def f(y):
        t = y[0]
        g = 1 + k * np.sum(y[1:])
        return np.array([t, g * (1 - t / g - 0.4 * math.exp(-5 * t) * math.sin(8 * PI * t))])

    def jac(y):
        t = y[0]
        g = 1 + k * np.sum(y[1:])
        e, s, c = math.exp(-5 * t), math.sin(8 * PI * t), math.cos(8 * PI * t)
        J = np.zeros((2, n))
        J[0, 0] = 1.0
        # f2 = g - t - 0.4 g e^{-5t} sin(8 pi t)
        J[1, 0] = -1 - 0.4 * g * e * (-5 * s + 8 * PI * c)
        J[1, 1:] = (1 - 0.4 * e * s) * k
        return J

    def front(count):
        return _curve_front(
            "P5", lambda t: np.column_stack([t, 1 - t - 0.4 * np.exp(-5 * t) * np.sin(8 * PI * t)]), count
        )

    return MopProblem(name, n, 2, Box.cube(n, 0.0, 1.0), f, jac, front, "damped wave, m=2")


def _p6(name: str, n: int) -> MopProblem:
    # 1-based z_{2j} (weight 10) are 0-based indices 1, 3, 5, ...;
    # z_{2j+1} (weight 5) are 0-based indices 2, 4, 6, ...
    w = np.zeros(n)
    w[1::2] = 10.0
    w[2::2] = 5.0

    def f(z):
        t = z[0]
        g = 1 + w @ z
        r = t / g
        return np.array(
            [
                t,
                g * (1 - r * r - r * math.sin(8 * PI * t)),
                g * (1 - r * r - r * math.cos(12 * PI * t)),
            ]
        )

    def jac(z):
        t = z[0]
        g = 1 + w @ z
        s8, c8 = math.sin(8 * PI * t), math.cos(8 * PI * t)
        s12, c12 = math.sin(12 * PI * t), math.cos(12 * PI * t)
        J = np.zeros((3, n))
        J[0, 0] = 1.0
        # f2 = g - t^2/g - t sin(8 pi t), f3 likewise with cos(12 pi t)
        J[1, 0] = -2 * t / g - s8 - 8 * PI * t * c8
        J[2, 0] = -2 * t / g - c12 + 12 * PI * t * s12
        dg = (1 + t * t / (g * g)) * w[1:]
        J[1, 1:] = dg
        J[2, 1:] = dg
        return J

    def front(count):
        def curve(t):
            return np.column_stack(
                [t, 1 - t * t - t * np.sin(8 * PI * t), 1 - t * t - t * np.cos(12 * PI * t)]
            )

        return _curve_front("P6", curve, count, dense=20_001)

    return MopProblem(name, n, 3, Box.cube(n, 0.0, 1.0), f, jac, front, "three objectives")


# ---------------------------------------------------------------- ZDT


def _zdt(name: str, n: int = 30) -> MopProblem:
    k = 9.0 / (n - 1)

    def h_and_dh(t, g):
        # returns f2 = g * h(t/g) pieces as (f2, df2/dt, df2/dg)
        tt = max(t, 1e-300)
        if name == "ZDT1":
            f2 = g - math.sqrt(tt * g)
            return f2, -0.5 * math.sqrt(g / tt), 1 - 0.5 * math.sqrt(tt / g)
        if name == "ZDT2":
            return g - t * t / g, -2 * t / g, 1 + t * t / (g * g)
        s, c = math.sin(10 * PI * t), math.cos(10 * PI * t)
        f2 = g - math.sqrt(tt * g) - t * s
        return f2, -0.5 * math.sqrt(g / tt) - s - 10 * PI * t * c, 1 - 0.5 * math.sqrt(tt / g)

    def f(y):
        g = 1 + k * np.sum(y[1:])
        return np.array([y[0], h_and_dh(y[0], g)[0]])

    def jac(y):
        g = 1 + k * np.sum(y[1:])
        _, dt, dg = h_and_dh(y[0], g)
        J = np.zeros((2, n))
        J[0, 0] = 1.0
        J[1, 0] = dt
        J[1, 1:] = dg * k
        return J

    def curve(t):
        if name == "ZDT1":
            return np.column_stack([t, 1 - np.sqrt(t)])
        if name == "ZDT2":
            return np.column_stack([t, 1 - t * t])
        return np.column_stack([t, 1 - np.sqrt(t) - t * np.sin(10 * PI * t)])

    return MopProblem(
        name, n, 2, Box.cube(n, 0.0, 1.0), f, jac, lambda c: _curve_front(name, curve, c), "ZDT suite"
    )


# ---------------------------------------------------------------- DTLZ


def _dtlz1(name: str, m: int, n: int) -> MopProblem:
    nk = n - m + 1

    def g_and_dg(y):
        z = y[m - 1 :] - 0.5
        g = 100 * (nk + np.sum(z * z - np.cos(20 * PI * z)))
        dg = 100 * (2 * z + 20 * PI * np.sin(20 * PI * z))
        return g, dg

    def shape(x):
        # f_i = 0.5 * prod(x[:m-1-i]) * (1 - x[m-1-i] if i > 0)
        out = np.empty(m)
        for i in range(m):
            p = 0.5 * np.prod(x[: m - 1 - i])
            if i > 0:
                p *= 1 - x[m - 1 - i]
            out[i] = p
        return out

    def f(y):
        g, _ = g_and_dg(y)
        return (1 + g) * shape(y[: m - 1])

    def jac(y):
        g, dg = g_and_dg(y)
        x = y[: m - 1]
        base = shape(x)
        J = np.zeros((m, n))
        for i in range(m):
            for a in range(m - 1):
                if a < m - 1 - i:
                    others = np.delete(x[: m - 1 - i], a)
                    d = 0.5 * np.prod(others)
                    if i > 0:
                        d *= 1 - x[m - 1 - i]
                elif i > 0 and a == m - 1 - i:
                    d = -0.5 * np.prod(x[: m - 1 - i])
                else:
                    d = 0.0
                J[i, a] = (1 + g) * d
            J[i, m - 1 :] = base[i] * dg
        return J

    def front(count):
        if m == 2:
            t = np.linspace(0, 1, count)
            return np.column_stack([0.5 * t, 0.5 * (1 - t)])
        return _thin(0.5 * _simplex_grid(count), count)

    return MopProblem(name, n, m, Box.cube(n, 0.0, 1.0), f, jac, front, "linear front, multimodal g")


def _dtlz2(name: str, m: int, n: int) -> MopProblem:
    def shape_and_grad(x):
        a = 0.5 * PI * x
        c, s = np.cos(a), np.sin(a)
        out = np.empty(m)
        grad = np.zeros((m, m - 1))
        for i in range(m):
            k = m - 1 - i
            v = np.prod(c[:k])
            if i > 0:
                v *= s[k]
            out[i] = v
            for a_idx in range(m - 1):
                if a_idx < k:
                    d = -0.5 * PI * s[a_idx] * np.prod(np.delete(c[:k], a_idx))
                    if i > 0:
                        d *= s[k]
                elif i > 0 and a_idx == k:
                    d = np.prod(c[:k]) * 0.5 * PI * c[k]
                else:
                    d = 0.0
                grad[i, a_idx] = d
        return out, grad

    def f(y):
        g = np.sum((y[m - 1 :] - 0.5) ** 2)
        return (1 + g) * shape_and_grad(y[: m - 1])[0]

    def jac(y):
        z = y[m - 1 :] - 0.5
        g = np.sum(z * z)
        base, grad = shape_and_grad(y[: m - 1])
        J = np.zeros((m, n))
        J[:, : m - 1] = (1 + g) * grad
        J[:, m - 1 :] = base[:, None] * 2 * z[None, :]
        return J

    def front(count):
        if m == 2:
            a = 0.5 * PI * np.linspace(0, 1, count)
            return np.column_stack([np.cos(a), np.sin(a)])
        P = _simplex_grid(count)
        P = P / np.linalg.norm(P, axis=1, keepdims=True)
        return _thin(P, count)

    return MopProblem(name, n, m, Box.cube(n, 0.0, 1.0), f, jac, front, "spherical front")


# ---------------------------------------------------------------- convex toys


def _convex(name: str, centers: np.ndarray) -> MopProblem:
    centers = np.asarray(centers, dtype=float)
    m, n = centers.shape

    def f(y):
        d = y[None, :] - centers
        return np.sum(d * d, axis=1)

    def jac(y):
        return 2 * (y[None, :] - centers)

    def front(count):
        # The Pareto set is the convex hull of the centers.
        if m == 2:
            t = np.linspace(0, 1, count)[:, None]
            Y = (1 - t) * centers[0] + t * centers[1]
        else:
            W = _simplex_grid(count)
            Y = W @ centers[:3]
        F = np.array([f(y) for y in Y])
        return _thin(F, count)

    return MopProblem(name, n, m, Box.cube(n, -1.0, 2.0), f, jac, front, "strictly convex toy")


# ---------------------------------------------------------------- registry

_FACTORIES: dict[str, Callable[[], MopProblem]] = {
    "P1": lambda: _p1(5),
    "P2": lambda: _p2(40),
    "P3": lambda: _p3(7),
    "ZDT1": lambda: _zdt("ZDT1"),
    "ZDT2": lambda: _zdt("ZDT2"),
    "ZDT3": lambda: _zdt("ZDT3"),
    "DTLZ1": lambda: _dtlz1("DTLZ1", 3, 7),
    "DTLZ1n2": lambda: _dtlz1("DTLZ1n2", 2, 2),
    "DTLZ2": lambda: _dtlz2("DTLZ2", 3, 12),
    "DTLZ2n2": lambda: _dtlz2("DTLZ2n2", 2, 2),
    "CONVEX2": lambda: _convex("CONVEX2", [[0.0, 0.0], [1.0, 1.0]]),
    "CONVEX3": lambda: _convex("CONVEX3", [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
}
for _suffix, _n in zip("abcd", (2, 50, 100, 150)):
    _FACTORIES[f"P4{_suffix}"] = (lambda n=_n, s=_suffix: _p4(f"P4{s}", n))
    _FACTORIES[f"P5{_suffix}"] = (lambda n=_n, s=_suffix: _p5(f"P5{s}", n))
for _suffix, _n in zip("abcd", (7, 50, 100, 150)):
    _FACTORIES[f"P6{_suffix}"] = (lambda n=_n, s=_suffix: _p6(f"P6{s}", n))


def register_problem(name: str, factory: Callable[[], MopProblem]) -> None:
    """Add a problem factory to the registry (overwrites an existing name)."""
    _FACTORIES[name] = factory


def problem_names() -> list[str]:
    return sorted(_FACTORIES)


def get_problem(name: str) -> MopProblem:
    try:
        factory = _FACTORIES[name]
    except KeyError:
        raise KeyError(
            f"unknown problem {name!r}; available: {', '.join(problem_names())}"
        ) from None
    return factory()


@lru_cache(maxsize=None)
def _cached_front(name: str, count: int) -> np.ndarray:
    return sample_true_front(get_problem(name), count)


def reference_front(name: str, count: int = 2000) -> np.ndarray:
    """Reference front from the shipped CSV cache, else from the sampler."""
    from omffm.io import cached_front_path, read_front_csv

    path = cached_front_path(name)
    if path is not None and path.exists():
        return read_front_csv(path).objectives
    return _cached_front(name, count).copy()

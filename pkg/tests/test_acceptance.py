"""Acceptance suite: one test per criterion, one PASS/FAIL line each.

Run with ``pytest -v tests/test_acceptance.py -s`` or directly with
``python3 tests/test_acceptance.py``. Every check is timed and its runtime
limit is part of the verdict.
"""

from __future__ import annotations

import json
import sys
import time
import warnings

import numpy as np
import pytest

from omffm.config import SolverConfig
from omffm.core import dominates, nondominated_filter, strictly_dominates
from omffm.driver import context_for, generate_initial_points, global_phase, run_omffm
from omffm.filled import FilledContext, admissible_interval, filled_gradient, filled_value, mu_lower, mu_upper, phi, phi_prime
from omffm.local import local_weak_efficient
from omffm.metrics import delta_spread, hypervolume, performance_profile, purity
from omffm.problems import MopProblem, get_problem, problem_names, reference_front
from omffm.core import Box

# ---------------------------------------------------------------- helpers


def central_rows(fun, y, h=1e-6):
    """Central differences of a vector function, one column per coordinate."""
    cols = []
    for i in range(y.size):
        e = np.zeros_like(y)
        e[i] = h * max(1.0, abs(y[i]))
        cols.append((fun(y + e) - fun(y - e)) / (2 * e[i]))
    return np.array(cols).T


def rel_err(A, B):
    return float(np.max(np.abs(A - B)) / max(1.0, np.max(np.abs(A))))


def interior(problem, rng, margin=1e-3):
    w = problem.box.width
    return problem.box.lower + margin * w + rng.random(problem.n) * (1 - 2 * margin) * w


def one_dim(fs, grads):
    return MopProblem(
        "toy", 1, len(fs), Box([-5.0], [5.0]),
        lambda y: np.array([f(y[0]) for f in fs]),
        lambda y: np.array([[g(y[0])] for g in grads]),
    )


def anchors(problem, count, seed):
    starts = generate_initial_points(problem, count, seed)
    return [local_weak_efficient(problem, y) for y in starts]


def _json(report):
    return json.dumps(report.to_dict(include_wall_time=False), sort_keys=True)


# ---------------------------------------------------------------- criteria


def check_kernel():
    hand = [phi(0.5, 2.0), phi(0.5, -1.0), phi_prime(0.5, 2.0), phi_prime(0.5, -1.0)]
    ok_hand = hand == [-4.0, -2.0, -6.0, 4.0]
    h = np.logspace(-2, -6, 9)
    slopes = []
    for nu in (0.1, 0.5, 1.0):
        jv = np.abs(phi(nu, h) - phi(nu, -h))
        jd = np.abs(phi_prime(nu, h) - phi_prime(nu, -h))
        slopes.append((float(np.polyfit(np.log(h), np.log(jv), 1)[0]), float(np.polyfit(np.log(h), np.log(jd), 1)[0])))
    ok_rate = all(abs(a - 2) <= 0.2 and abs(b - 1) <= 0.1 for a, b in slopes)
    return ok_hand and ok_rate, f"hand={hand} slopes={[(round(a, 3), round(b, 3)) for a, b in slopes]}"


def check_gradients():
    rng = np.random.default_rng(2)
    worst_jac = worst_F = 0.0
    for name in problem_names():
        p = get_problem(name)
        for _ in range(100):
            y = interior(p, rng)
            worst_jac = max(worst_jac, rel_err(p.jacobian(y), central_rows(p.objectives, y)))
    for name in ("P1", "P2", "P4a", "P5a", "ZDT1", "ZDT3", "DTLZ2n2", "P6a", "CONVEX3"):
        p = get_problem(name)
        done = 0
        while done < 100:
            x, y = interior(p, rng), interior(p, rng)
            ctx = FilledContext(x, p.objectives(x), mu=float(rng.uniform(0.01, 1.0)))
            h = 1e-6 * np.maximum(1.0, np.abs(y))
            # skip points whose FD stencil could straddle the kink of phi
            lip = np.abs(p.jacobian(y)).sum(axis=1) * h.max()
            if np.any(np.abs(p.objectives(y) - ctx.anchor_objectives) <= max(1e-4, 10 * lip.max())):
                continue
            G = filled_gradient(ctx, p, y)
            B = central_rows(lambda z: filled_value(ctx, p, z), y)
            worst_F = max(worst_F, rel_err(G, B))
            done += 1
    return max(worst_jac, worst_F) < 1e-5, f"worst jacobian rel err {worst_jac:.2e}, worst filled-gradient rel err {worst_F:.2e}"


def check_f1():
    rng = np.random.default_rng(3)
    eps = SolverConfig().epsilon
    total = bad = 0
    for name in ("P1", "P4a", "P5a", "ZDT1", "DTLZ2n2"):
        p = get_problem(name)
        for a in anchors(p, 20, 3):
            ctx = FilledContext(a.point, a.objectives)
            kept = 0
            while kept < 500:
                d = rng.normal(size=p.n)
                d *= eps * rng.random() ** (1 / p.n) / np.linalg.norm(d)
                y = np.clip(a.point + d, p.box.lower, p.box.upper)
                if np.array_equal(y, a.point):
                    continue
                kept += 1
                total += 1
                bad += not np.any(filled_value(ctx, p, y) < 0)
    return bad == 0 and total == 5 * 20 * 500, f"{total - bad}/{total} samples with some F_j < 0"


def check_f2():
    p = one_dim([lambda y: y * y, lambda y: (y - 0.8) ** 2], [lambda y: 2 * y, lambda y: 2 * (y - 0.8)])
    q = one_dim([lambda y: np.sin(np.pi * y) + y, lambda y: y * y],
                [lambda y: np.pi * np.cos(np.pi * y) + 1, lambda y: 2 * y])
    c_p = FilledContext(np.zeros(1), p.objectives(np.zeros(1)), mu=0.5)
    c_q = FilledContext(np.zeros(1), q.objectives(np.zeros(1)), mu=0.5)
    lo = mu_lower(c_p, p, [1.0], [1.0])
    hi = mu_upper(c_q, q, [1.0], [1.0])
    ok_hand = abs(lo - 0.24001) <= 1e-6 and abs(hi - 2 / (3 * (np.pi - 1))) <= 1e-6 and abs(hi - 0.3113) < 1e-4

    rng = np.random.default_rng(4)
    pool = [get_problem(n) for n in ("P1", "P2", "P3", "P4a", "P5a", "ZDT1", "ZDT3", "DTLZ2n2", "P6a", "CONVEX3")]
    tried = passed = 0
    while tried < 1000:
        pr = pool[rng.integers(len(pool))]
        x = interior(pr, rng)
        ybar = x + rng.uniform(0.01, 0.3) * (interior(pr, rng) - x)
        ctx = FilledContext(x, pr.objectives(x))
        mL, mU = admissible_interval(ctx, pr, ybar)
        if not mL < mU:
            continue
        tried += 1
        mu = 0.5 * (mL + mU)
        G = filled_gradient(FilledContext(x, ctx.anchor_objectives, mu=mu), pr, ybar)
        passed += bool(np.all(G @ (ybar - x) < 0))
    return ok_hand and passed == tried, f"mu_L={lo:.8f} mu_U={hi:.8f}; descent at midpoint {passed}/{tried}"


def check_escape():
    p = get_problem("P4a")
    cfg = SolverConfig()
    a = local_weak_efficient(p, [0.9, 0.5], cfg)
    hits = 0
    for seed in range(20):
        out = global_phase(p, a, context_for(a, cfg, p.n), cfg, np.random.default_rng([seed, 0x7F11]))
        hits += out.is_improved and strictly_dominates(out.objectives, a.objectives)
    witness = bool(np.any(np.all(reference_front("P4a") < a.objectives, axis=1)))
    return hits >= 19, (
        f"anchor F={np.round(a.objectives, 6).tolist()}; improved in {hits}/20 seeds; "
        f"reference front has a strictly dominating point: {witness}"
    )


def check_front_quality():
    lines, ok = [], True
    for name in ("P4a", "P5a", "ZDT1", "ZDT3", "DTLZ2n2"):
        r = run_omffm(get_problem(name), SolverConfig(N=30, seed=0))
        pff = r.pff.objectives
        pur = purity(pff, [pff, reference_front(name)])
        hv_pf, hv_pff = hypervolume(r.pf.objectives, r.hv_reference), hypervolume(pff, r.hv_reference)
        ok &= pur >= 0.90 and hv_pff >= hv_pf
        lines.append(f"{name}: purity={pur:.3f} HV(PF)={hv_pf:.4f} HV(PFF)={hv_pff:.4f}")
    return ok, "; ".join(lines)


def _mc_hv(F, ref, rng, samples=400_000):
    lo = F.min(axis=0)
    U = lo + rng.random((samples, F.shape[1])) * (ref - lo)
    hit = np.zeros(samples, dtype=bool)
    for f in F:
        hit |= np.all(U >= f, axis=1)
    return hit.mean() * np.prod(ref - lo)


def check_metrics():
    ok = hypervolume([[0, 1], [1, 0]], [2, 2]) == 3.0
    rng = np.random.default_rng(7)
    worst = {}
    for m, tol in ((2, 0.01), (3, 0.02)):
        errs = []
        for _ in range(20):
            F = rng.random((rng.integers(2, 20), m))
            ref = np.full(m, 1.1)
            exact = hypervolume(F, ref)
            errs.append(abs(exact - _mc_hv(F, ref, rng)) / exact)
        worst[m] = max(errs)
        ok &= worst[m] <= tol
    a, b = performance_profile([[1, 2], [3, 3]])
    ok &= (a.at(1), b.at(1), a.at(2), b.at(2)) == (1.0, 0.5, 1.0, 1.0)
    t = np.linspace(0, 1, 9)
    d = delta_spread(np.c_[t, 1 - t], ([0, 1], [1, 0]))
    ok &= d == 0.0
    return ok, f"HV MC rel err 2-D {worst[2]:.4f}, 3-D {worst[3]:.4f}; Delta(uniform)={d}"


def check_invariants():
    ok, notes = True, []
    for name, N in (("P4a", 20), ("ZDT3", 10), ("P5a", 20), ("DTLZ2n2", 10)):
        p = get_problem(name)
        cfg = SolverConfig(N=N, seed=11)
        outside = []

        def hook(y, box=p.box):
            if not (np.all(y >= box.lower) and np.all(y <= box.upper)):
                outside.append(np.array(y))

        r1 = run_omffm(p, cfg, eval_hook=hook)
        r2 = run_omffm(p, cfg)
        same = _json(r1) == _json(r2)
        decreasing = all(strictly_dominates(b, a) for path in r1.trajectories for a, b in zip(path, path[1:]))
        tries = [t for per_start in r1.rounds for t in per_start]
        bounded = all(rounds <= bound for rounds, bound in tries)
        ok &= same and decreasing and bounded and not outside and r1.evals > 0
        notes.append(f"{name}: identical={same} decreasing={decreasing} rounds<=bound {sum(r <= b for r, b in tries)}/{len(tries)} infeasible={len(outside)}/{r1.evals}")
    return ok, "; ".join(notes)


def _oracle_filter(F):
    keep = []
    for i, f in enumerate(F):
        if any(dominates(g, f) for g in F):
            continue
        if any(np.array_equal(F[k], f) for k in keep):
            continue
        keep.append(i)
    return F[keep]


def check_brute_force():
    rng = np.random.default_rng(9)
    mismatches = 0
    for _ in range(1000):
        k, m = int(rng.integers(0, 51)), int(rng.integers(2, 4))
        F = rng.integers(0, 6, size=(k, m)).astype(float) if rng.random() < 0.5 else rng.random((k, m))
        got = nondominated_filter(F).objectives.reshape(-1, m) if k else np.zeros((0, m))
        mismatches += not np.array_equal(got, _oracle_filter(F).reshape(-1, m))
    worst, converged = 0.0, 0
    for name in problem_names():
        p = get_problem(name)
        for res in anchors(p, 5, 9):
            if res.converged:
                converged += 1
                worst = max(worst, res.residual)
    return mismatches == 0 and worst < 1e-5 and converged > 0, (
        f"filter mismatches {mismatches}/1000; max residual {worst:.2e} over {converged} converged local results"
    )


CRITERIA = [
    (1, "kernel exactness", check_kernel, 1),
    (2, "gradient consistency", check_gradients, 30),
    (3, "F1 neighbourhood property", check_f1, 120),
    (4, "F2 descent-direction property", check_f2, 60),
    (5, "escape from P4a anchor of (0.9, 0.5)", check_escape, 300),
    (6, "end-to-end front quality", check_front_quality, 900),
    (7, "metric oracles", check_metrics, 120),
    (8, "algorithmic invariants", check_invariants, 300),
    (9, "brute-force equivalence", check_brute_force, 120),
]


def evaluate(number):
    _, label, fn, limit = next(c for c in CRITERIA if c[0] == number)
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        ok, detail = fn()
    elapsed = time.perf_counter() - t0
    ok = bool(ok) and elapsed < limit
    line = f"CRITERION {number} {'PASS' if ok else 'FAIL'}: {label} [{elapsed:.1f}s / {limit}s] {detail}"
    return ok, line


@pytest.mark.slow
@pytest.mark.parametrize("number", [c[0] for c in CRITERIA])
def test_criterion(number, capsys):
    ok, line = evaluate(number)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [evaluate(c[0]) for c in CRITERIA]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)

"""Write the cached reference fronts shipped in ``omffm/data/fronts``.

Each front comes from the problem's analytic sampler (the global front lies
on the manifold where the distance function is minimal). Before writing,
the front is checked against a dense random sample of the decision box: no
sampled point may dominate a front point by more than ``--slack``.

    python scripts/build_reference_fronts.py [--count 2000] [--probe 200000]
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from omffm.core import nondominated_mask
from omffm.io import FRONT_DIR, write_front_csv
from omffm.problems import get_problem, problem_names, sample_true_front

DEFAULT = ["P1", "P2", "P3", "P4a", "P5a", "P6a", "ZDT1", "ZDT2", "ZDT3",
           "DTLZ1n2", "DTLZ2n2", "DTLZ2", "CONVEX2", "CONVEX3"]


def probe_violation(name: str, front: np.ndarray, probes: int, seed: int = 0) -> float:
    """Largest margin by which a random feasible point beats a front point."""
    problem = get_problem(name)
    rng = np.random.default_rng(seed)
    box = problem.box
    Y = box.lower + rng.random((probes, problem.n)) * box.width
    F = np.array([problem.objectives(y) for y in Y])
    F = F[nondominated_mask(F)]
    worst = 0.0
    for f in F:
        # margin > 0 means f strictly dominates some front point by that much
        margin = np.min(front - f, axis=1)
        worst = max(worst, float(np.max(margin)))
    return worst


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("problems", nargs="*", default=DEFAULT)
    parser.add_argument("--count", type=int, default=2000)
    parser.add_argument("--probe", type=int, default=20000)
    parser.add_argument("--slack", type=float, default=1e-6)
    args = parser.parse_args(argv)
    bad = 0
    for name in args.problems:
        if name not in problem_names():
            print(f"skip unknown problem {name}", file=sys.stderr)
            continue
        problem = get_problem(name)
        front = sample_true_front(problem, args.count)
        worst = probe_violation(name, front, args.probe)
        status = "ok" if worst <= args.slack else "VIOLATED"
        bad += status != "ok"
        print(f"{name:8s} {len(front):5d} points  probe margin {worst:.3e}  {status}")
        meta = {"problem": name, "n": 0, "m": problem.m, "source": "analytic sampler"}
        write_front_csv(FRONT_DIR / f"{name}.csv", np.zeros((len(front), 0)), front, meta)
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Exit codes: 0 ok, 2 unknown problem, 3 configuration error, 4 data error,
5 internal error. ``OMFFM_LOG`` (error, warn, info, debug) sets the log
level.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from omffm.config import SolverConfig
from omffm.core import ConfigurationError, nondominated_mask
from omffm.driver import estimate_ideal_nadir, hv_reference_point, run_local_only, run_omffm
from omffm.io import FrontFormatError, dump_json, format_front_csv, read_front_csv, atomic_write
from omffm.metrics import (
    INF,
    format_profile_csv,
    front_extremes,
    front_metrics,
    performance_profile,
    profile_scores,
)
from omffm.problems import get_problem, problem_names, reference_front

log = logging.getLogger("omffm")

EXIT_OK, EXIT_UNKNOWN_PROBLEM, EXIT_CONFIG, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4, 5
SOLVERS = {"omffm": run_omffm, "local_only": run_local_only}
PROFILE_METRICS = ("purity", "hypervolume", "gamma_spread", "delta_spread", "evals")
LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


class UnknownProblem(KeyError):
    pass


class DataError(Exception):
    pass


def _problem(name: str):
    try:
        return get_problem(name)
    except KeyError as exc:
        raise UnknownProblem(exc.args[0]) from None


def _config(path: Optional[str], seed: Optional[int]) -> SolverConfig:
    cfg = SolverConfig.from_json(path) if path else SolverConfig()
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    return cfg


def _parse_point(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise ConfigurationError(f"cannot parse point {text!r}; expected comma-separated numbers") from None


# ---------------------------------------------------------------- run


def write_run(report, out_dir: Path, seed: int) -> None:
    meta = {"problem": report.problem, "solver": report.solver, "seed": seed}
    for name, archive in (("front_pf.csv", report.pf), ("front_pff.csv", report.pff)):
        n = archive.points.shape[1] if len(archive) else 0
        m = archive.objectives.shape[1] if len(archive) else 0
        text = format_front_csv(archive.points, archive.objectives, {**meta, "n": n, "m": m})
        atomic_write(out_dir / name, text)
    dump_json(report.to_dict(), out_dir / "report.json")


def cmd_run(problem_name: str, config_path: Optional[str], out_dir, seed: Optional[int] = None, solver: str = "omffm") -> int:
    problem = _problem(problem_name)
    cfg = _config(config_path, seed)
    report = SOLVERS[solver](problem, cfg)
    write_run(report, Path(out_dir), cfg.seed)
    log.info("%s: |PF|=%d |PFF|=%d evals=%d", problem.name, len(report.pf), len(report.pff), report.evals)
    return EXIT_OK


# ---------------------------------------------------------------- bench


@dataclass(frozen=True)
class CampaignSpec:
    problems: tuple
    solvers: tuple
    config: SolverConfig
    repeats: int
    output_dir: Path

    @classmethod
    def from_dict(cls, data: dict, base: Path = Path(".")) -> "CampaignSpec":
        if not isinstance(data, dict):
            raise ConfigurationError("campaign must be a JSON object")
        known = {"problems", "solver", "solvers", "config", "repeats", "output_dir"}
        extra = sorted(set(data) - known)
        if extra:
            raise ConfigurationError(f"unknown campaign keys: {', '.join(extra)}")
        problems = data.get("problems")
        if not problems or not isinstance(problems, list):
            raise ConfigurationError("campaign needs a nonempty 'problems' list")
        solvers = data.get("solvers", data.get("solver", "omffm"))
        solvers = [solvers] if isinstance(solvers, str) else list(solvers)
        bad = [s for s in solvers if s not in SOLVERS]
        if bad or not solvers:
            raise ConfigurationError(f"unknown solver(s) {bad}; choose from {sorted(SOLVERS)}")
        repeats = data.get("repeats", 1)
        if not isinstance(repeats, int) or repeats < 1:
            raise ConfigurationError("repeats must be a positive integer")
        out = Path(data.get("output_dir", "bench_out"))
        return cls(
            problems=tuple(problems),
            solvers=tuple(solvers),
            config=SolverConfig.from_dict(data.get("config", {})),
            repeats=repeats,
            output_dir=out if out.is_absolute() else base / out,
        )

    @classmethod
    def from_json(cls, path) -> "CampaignSpec":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read campaign {path}: {exc}") from None
        return cls.from_dict(data, path.parent)


def cell_seed(seed: int, problem: str, repeat: int) -> int:
    """Independent seed per campaign cell, stable across runs and platforms."""
    ss = np.random.SeedSequence([seed, zlib.crc32(problem.encode()), repeat])
    return int(ss.generate_state(1)[0])


def _run_cell(args) -> dict:
    problem_name, solver, cfg, repeat = args
    try:
        report = SOLVERS[solver](get_problem(problem_name), cfg)
        return {
            "problem": problem_name,
            "solver": solver,
            "repeat": repeat,
            "seed": cfg.seed,
            "failed": False,
            "pff": report.pff.objectives.tolist(),
            "evals": report.evals,
        }
    except Exception as exc:  # a crashing cell is recorded, not fatal
        return {
            "problem": problem_name,
            "solver": solver,
            "repeat": repeat,
            "seed": cfg.seed,
            "failed": True,
            "error": f"{type(exc).__name__}: {exc}",
        }


def _problem_context(name: str, cfg: SolverConfig):
    """Hypervolume reference and Delta extremes shared by all cells of a problem."""
    problem = get_problem(name)
    try:
        ideal, nadir = estimate_ideal_nadir(problem.fresh(), cfg)
        ref = hv_reference_point(ideal, nadir)
    except Exception as exc:
        log.warning("%s: ideal/nadir estimate failed (%s); using the fronts instead", name, exc)
        ref = None
    extremes = None
    if problem.m == 2:
        try:
            extremes = front_extremes(reference_front(name))
        except Exception:
            extremes = None
    return ref, extremes


def score_cells(cells: list[dict], contexts: dict) -> list[dict]:
    """Attach metrics; purity compares solvers on the same (problem, repeat)."""
    groups: dict[tuple, list] = {}
    for c in cells:
        if not c["failed"]:
            groups.setdefault((c["problem"], c["repeat"]), []).append(np.asarray(c["pff"], dtype=float))
    out = []
    for c in cells:
        entry = {k: v for k, v in c.items() if k != "pff"}
        ref, extremes = contexts[c["problem"]]
        found = [F for F in groups.get((c["problem"], c["repeat"]), []) if F.size]
        if ref is None and found:
            U = np.vstack(found)
            R = U[nondominated_mask(U)]
            ref = hv_reference_point(R.min(axis=0), R.max(axis=0))
        entry["hv_reference"] = None if ref is None else ref.tolist()
        if not c["failed"] and ref is not None:
            F = np.asarray(c["pff"], dtype=float)
            rep = front_metrics(F, groups[(c["problem"], c["repeat"])], ref, extremes, c["evals"])
            entry.update(rep.to_dict())
        out.append(entry)
    return out


def profiles_from_metrics(entries: list[dict]) -> dict[str, list]:
    """Profile curves per metric; rows are (problem, repeat), columns solvers."""
    solvers = sorted({e["solver"] for e in entries})
    rows = sorted({(e["problem"], e["repeat"]) for e in entries})
    index = {(e["problem"], e["repeat"], e["solver"]): e for e in entries}
    curves = {}
    for metric in PROFILE_METRICS:
        V = np.full((len(rows), len(solvers)), np.nan)
        failed = np.ones(V.shape, dtype=bool)
        for i, (p, r) in enumerate(rows):
            for j, s in enumerate(solvers):
                e = index.get((p, r, s))
                if e is None or e.get("failed") or metric not in e:
                    continue
                v = e[metric]
                v = INF if v == "inf" else float(v)
                if not np.isfinite(v):
                    continue
                V[i, j] = v
                failed[i, j] = False
        S = profile_scores(metric, np.where(failed, 1.0, V))
        if metric not in ("purity", "hypervolume"):
            S = S + 1e-12  # zero spread or cost would break the ratio
        if np.all(failed):
            continue
        curves[metric] = performance_profile(S, failed, solvers)
    return curves


def write_profiles(curves: dict, out_dir: Path) -> None:
    for metric, cs in curves.items():
        atomic_write(out_dir / f"profile_{metric}.csv", format_profile_csv(cs))


def cmd_bench(campaign_path, jobs: int = 1, repeats: Optional[int] = None, seed: Optional[int] = None, out_dir=None) -> int:
    spec = CampaignSpec.from_json(campaign_path)
    if repeats is not None:
        spec = replace(spec, repeats=repeats)
    if seed is not None:
        spec = replace(spec, config=replace(spec.config, seed=seed))
    if out_dir is not None:
        spec = replace(spec, output_dir=Path(out_dir))
    for name in spec.problems:
        _problem(name)
    tasks = []
    for name in spec.problems:
        for r in range(spec.repeats):
            cfg = replace(spec.config, seed=cell_seed(spec.config.seed, name, r))
            tasks.extend((name, s, cfg, r) for s in spec.solvers)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(_run_cell, tasks))
    else:
        cells = [_run_cell(t) for t in tasks]
    contexts = {name: _problem_context(name, spec.config) for name in spec.problems}
    entries = score_cells(cells, contexts)
    spec.output_dir.mkdir(parents=True, exist_ok=True)
    dump_json(entries, spec.output_dir / "metrics.json")
    write_profiles(profiles_from_metrics(entries), spec.output_dir)
    for e in entries:
        if e["failed"]:
            log.warning("%s/%s repeat %d failed: %s", e["problem"], e["solver"], e["repeat"], e["error"])
    return EXIT_OK


# ---------------------------------------------------------------- metrics


def _read_front(path):
    try:
        return read_front_csv(path)
    except FrontFormatError as exc:
        raise DataError(f"{path}: {exc}") from None
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from None


def cmd_metrics(front_paths: Sequence[str], reference_path: Optional[str] = None, hv_ref: Optional[str] = None, out=None) -> int:
    fronts = [_read_front(p) for p in front_paths]
    objs = [f.objectives for f in fronts]
    ms = {F.shape[1] for F in objs if F.size}
    if len(ms) > 1:
        raise DataError(f"fronts disagree on the number of objectives: {sorted(ms)}")
    pool = list(objs)
    if reference_path:
        pool.append(_read_front(reference_path).objectives)
    nonempty = [F for F in pool if F.size]
    if not nonempty:
        raise DataError("all fronts are empty")
    U = np.vstack(nonempty)
    R = U[nondominated_mask(U)]
    if hv_ref:
        ref = _parse_point(hv_ref)
        if ref.size != U.shape[1]:
            raise ConfigurationError(f"--hv-ref has {ref.size} components, fronts have {U.shape[1]}")
    else:
        ref = hv_reference_point(R.min(axis=0), R.max(axis=0))
    extremes = front_extremes(R) if U.shape[1] == 2 else None
    entries = []
    for path, front in zip(front_paths, fronts):
        rep = front_metrics(front.objectives, pool, ref, extremes)
        entries.append({
            "front": str(path),
            "problem": front.meta.get("problem"),
            "solver": front.meta.get("solver"),
            "seed": front.meta.get("seed"),
            "hv_reference": ref.tolist(),
            **rep.to_dict(),
        })
    text = dump_json(entries, out)
    sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------- profile / list


def cmd_profile(metrics_path, out_dir) -> int:
    try:
        entries = json.loads(Path(metrics_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read {metrics_path}: {exc}") from None
    if not isinstance(entries, list) or not all(isinstance(e, dict) and {"problem", "solver", "repeat"} <= set(e) for e in entries):
        raise DataError(f"{metrics_path}: expected a list of metric entries")
    write_profiles(profiles_from_metrics(entries), Path(out_dir))
    return EXIT_OK


def cmd_list_problems() -> int:
    for name in problem_names():
        p = get_problem(name)
        print(f"{name:10s} n={p.n:<4d} m={p.m}  {p.description}")
    return EXIT_OK


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="omffm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="solve one problem")
    run.add_argument("--problem", required=True)
    run.add_argument("--config", help="flat JSON with SolverConfig fields")
    run.add_argument("--seed", type=int)
    run.add_argument("--out", default=".", help="output directory")
    run.add_argument("--solver", choices=sorted(SOLVERS), default="omffm")

    bench = sub.add_parser("bench", help="run a campaign and build performance profiles")
    bench.add_argument("campaign", help="campaign JSON: problems, solvers, config, repeats, output_dir")
    bench.add_argument("--jobs", type=int, default=1)
    bench.add_argument("--repeats", type=int)
    bench.add_argument("--seed", type=int)
    bench.add_argument("--out", help="overrides output_dir of the campaign")

    metrics = sub.add_parser(
        "metrics",
        help="indicators for front CSV files",
        description="Purity, spreads and hypervolume of front CSVs. Profiles score purity "
        "and hypervolume as 1/(value + 1e-12) so that lower is better.",
    )
    metrics.add_argument("fronts", nargs="+")
    metrics.add_argument("--reference", help="reference front CSV joined to the purity pool")
    metrics.add_argument("--hv-ref", help="hypervolume reference point, e.g. 2,2")
    metrics.add_argument("--out", help="also write the JSON here")

    profile = sub.add_parser("profile", help="performance profiles from a metrics.json")
    profile.add_argument("metrics")
    profile.add_argument("--out", default=".")

    sub.add_parser("list-problems", help="show registered problems")
    return parser


def _setup_logging() -> None:
    level = LOG_LEVELS.get(os.environ.get("OMFFM_LOG", "warn").lower(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def main(argv: Optional[Sequence[str]] = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args.problem, args.config, args.out, args.seed, args.solver)
        if args.command == "bench":
            if args.jobs < 1:
                raise ConfigurationError("--jobs must be positive")
            return cmd_bench(args.campaign, args.jobs, args.repeats, args.seed, args.out)
        if args.command == "metrics":
            return cmd_metrics(args.fronts, args.reference, args.hv_ref, args.out)
        if args.command == "profile":
            return cmd_profile(args.metrics, args.out)
        return cmd_list_problems()
    except UnknownProblem as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_UNKNOWN_PROBLEM
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

"""Front CSV and JSON report formats.

Front CSV layout::

    # problem=P4a
    # n=2
    # m=2
    # solver=omffm
    # seed=0
    y_1,...,y_n,f_1,...,f_m     <- one row per point, 17 significant digits

Header lines start with ``#`` and hold ``key=value`` pairs. A file without
an ``n`` header is read as objective columns only.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from omffm.core import OmffmError

FRONT_DIR = Path(__file__).resolve().parent / "data" / "fronts"


class FrontFormatError(OmffmError, ValueError):
    """Malformed front CSV; ``line`` is 1-based."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass
class FrontData:
    points: np.ndarray
    objectives: np.ndarray
    meta: dict[str, str] = field(default_factory=dict)


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def format_front_csv(points, objectives, meta: dict[str, Any] | None = None) -> str:
    F = np.atleast_2d(np.asarray(objectives, dtype=float))
    X = np.asarray(points, dtype=float)
    if F.size == 0:
        F = F.reshape(0, int((meta or {}).get("m", 0)))
    if X.size == 0:
        X = np.zeros((len(F), 0))
    X = X.reshape(len(F), -1)
    lines = [f"# {k}={v}" for k, v in (meta or {}).items()]
    for x, f in zip(X, F):
        lines.append(",".join(_fmt(v) for v in (*x, *f)))
    return "\n".join(lines) + "\n"


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_front_csv(path, points, objectives, meta: dict[str, Any] | None = None) -> None:
    atomic_write(Path(path), format_front_csv(points, objectives, meta))


def parse_front_csv(text: str) -> FrontData:
    meta: dict[str, str] = {}
    rows: list[list[float]] = []
    width = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                meta[key.strip()] = value.strip()
            continue
        cells = line.split(",")
        try:
            row = [float(c) for c in cells]
        except ValueError:
            raise FrontFormatError(f"non-numeric cell in {raw!r}", lineno) from None
        if not all(math.isfinite(v) for v in row):
            raise FrontFormatError("non-finite value", lineno)
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise FrontFormatError(f"expected {width} columns, found {len(row)}", lineno)
        rows.append(row)
    A = np.array(rows, dtype=float).reshape(len(rows), width or 0)
    n = int(meta.get("n", 0))
    if "m" in meta and width is not None and n + int(meta["m"]) != width:
        raise FrontFormatError(f"header says n+m={n + int(meta['m'])}, rows have {width}", 1)
    if width is not None and n >= width:
        raise FrontFormatError(f"n={n} leaves no objective columns", 1)
    return FrontData(A[:, :n], A[:, n:], meta)


def read_front_csv(path) -> FrontData:
    return parse_front_csv(Path(path).read_text())


def cached_front_path(name: str) -> Path | None:
    path = FRONT_DIR / f"{name}.csv"
    return path if path.exists() else None


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return v
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dump_json(obj, path=None) -> str:
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=False) + "\n"
    if path is not None:
        atomic_write(Path(path), text)
    return text

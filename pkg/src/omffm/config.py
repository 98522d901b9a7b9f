"""Solver configuration."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

from omffm.core import ConfigurationError


@dataclass(frozen=True)
class SolverConfig:
    """Tunables of the filled-function solver.

    ``kappa`` defaults to ``1e-4 * sqrt(n)``, ``beta_U`` to ``epsilon`` and
    ``crit_tol`` to ``1e-12 * sqrt(n)``; those are resolved per problem by
    :meth:`resolved`.
    """

    N: int = 20
    mu_ini: float = 0.01
    mu_hat: float = 0.005
    mu_U: float = 1.0
    epsilon: float = 0.1
    kappa: Optional[float] = None
    beta_U: Optional[float] = None
    l: int = 1
    max_global_rounds: int = 50
    max_escapes: int = 200
    max_local_iters: int = 1000
    eval_budget: Optional[int] = 5_000_000
    seed: int = 0
    trial_count_factor: int = 2
    crit_tol: Optional[float] = None

    def __post_init__(self):
        if self.N < 1:
            raise ConfigurationError("N must be at least 1")
        if not 0 < self.mu_ini < 1:
            raise ConfigurationError("need 0 < mu_ini < 1")
        if not 0 < self.mu_hat < 1:
            raise ConfigurationError("need 0 < mu_hat < 1")
        if not 0 < self.mu_U <= 1:
            raise ConfigurationError("need 0 < mu_U <= 1")
        if self.epsilon <= 0:
            raise ConfigurationError("epsilon must be positive")
        if self.kappa is not None and self.kappa <= 0:
            raise ConfigurationError("kappa must be positive")
        if self.beta_U is not None and self.beta_U <= 0:
            raise ConfigurationError("beta_U must be positive")
        if self.l < 1 or self.trial_count_factor < 1:
            raise ConfigurationError("l and trial_count_factor must be positive integers")
        if self.eval_budget is not None and self.eval_budget < 0:
            raise ConfigurationError("eval_budget must be non-negative")
        if self.seed < 0:
            raise ConfigurationError("seed must be unsigned")

    def resolved(self, n: int) -> "SolverConfig":
        from dataclasses import replace

        return replace(
            self,
            kappa=1e-4 * math.sqrt(n) if self.kappa is None else self.kappa,
            beta_U=self.epsilon if self.beta_U is None else self.beta_U,
            crit_tol=1e-12 * math.sqrt(n) if self.crit_tol is None else self.crit_tol,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SolverConfig":
        if not isinstance(data, dict):
            raise ConfigurationError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from None

    @classmethod
    def from_json(cls, path) -> "SolverConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(data)

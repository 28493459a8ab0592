"""Protocol settings, per-run records, experiment aggregates and checkpoint reports."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ..errors import ConfigurationError, ProtocolError
from ..evalstats import SummaryStat

PAPER_SCALE_BUDGETS = (50_000, 100_000, 200_000)
METRICS = ("final", "max", "average")


@dataclass(frozen=True)
class EvalProtocol:
    eval_episodes: int = 32
    eval_every: int = 250
    num_seeds: int = 10
    update_budget: int = 5000
    checkpoints: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "checkpoints", tuple(sorted({int(c) for c in self.checkpoints})))
        if self.eval_episodes < 1:
            raise ConfigurationError("eval_episodes must be >= 1")
        if self.eval_every < 1 or self.update_budget < 1:
            raise ConfigurationError("eval_every and update_budget must be >= 1")
        if self.update_budget % self.eval_every:
            raise ConfigurationError(
                f"update_budget {self.update_budget} is not divisible by eval_every {self.eval_every}")
        if self.num_seeds < 1:
            raise ConfigurationError("num_seeds must be >= 1")
        bad = [c for c in self.checkpoints if not 1 <= c <= self.update_budget]
        if bad:
            raise ConfigurationError(f"checkpoints {bad} outside [1, {self.update_budget}]")

    @classmethod
    def paper_scale(cls, budget: int, **kw) -> EvalProtocol:
        if budget not in PAPER_SCALE_BUDGETS:
            raise ConfigurationError(f"paper-scale budgets are {PAPER_SCALE_BUDGETS}")
        kw.setdefault("eval_every", budget // 20)
        return cls(update_budget=budget, **kw)

    def eval_points(self) -> list[int]:
        """Update counts after which an evaluation runs, ascending."""
        regular = range(self.eval_every, self.update_budget + 1, self.eval_every)
        return sorted(set(regular) | set(self.checkpoints))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["checkpoints"] = list(self.checkpoints)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> EvalProtocol:
        return cls(**{**d, "checkpoints": tuple(d.get("checkpoints", ()))})


@dataclass
class RunRecord:
    config_hash: str
    seed: int
    eval_series: list[tuple[int, float]]
    final_return: float
    max_return: float
    average_return: float
    wall_clock_s: float
    params_digest: str = ""
    updates: int = 0
    episodes_evaluated: int = 0

    @classmethod
    def from_series(cls, config_hash: str, seed: int, series: Sequence[tuple[int, float]], wall_clock_s: float = 0.0,
                    params_digest: str = "", updates: int | None = None, episodes_evaluated: int = 0) -> RunRecord:
        if not series:
            raise ProtocolError("a run record needs at least one evaluation")
        series = [(int(u), float(r)) for u, r in series]
        returns = [r for _, r in series]
        return cls(config_hash, int(seed), series, returns[-1], max(returns), float(np.mean(returns)),
                   float(wall_clock_s), params_digest, series[-1][0] if updates is None else int(updates),
                   int(episodes_evaluated))

    def metric(self, name: str) -> float:
        if name not in METRICS:
            raise ConfigurationError(f"unknown metric {name!r}; known: {METRICS}")
        return getattr(self, f"{name}_return")

    def at(self, update: int) -> float:
        for u, r in self.eval_series:
            if u == update:
                return r
        raise ProtocolError(f"no evaluation at update {update} in run seed={self.seed}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["eval_series"] = [list(p) for p in self.eval_series]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> RunRecord:
        return cls(**{**d, "eval_series": [tuple(p) for p in d["eval_series"]]})


@dataclass
class ExperimentResult:
    """All seeds of one (algorithm, dataset, hyperparameters, protocol) configuration.

    Aggregate std uses the population convention (ddof = 0) over seeds.
    """

    algo_id: str
    env_id: str
    config_hash: str
    protocol: EvalProtocol
    records: list[RunRecord]
    failed: bool = False
    errors: list[tuple[int, str]] = field(default_factory=list)
    quality: str = ""

    def values(self, metric: str) -> np.ndarray:
        return np.array([r.metric(metric) for r in self.records], dtype=np.float64)

    def aggregate(self) -> dict[str, tuple[float, float]]:
        if not self.records:
            return {}
        return {m: (float(self.values(m).mean()), float(self.values(m).std())) for m in METRICS}

    def summary_stat(self, metric: str = "final", label: str | None = None) -> SummaryStat:
        """Mean and sample std over seeds, the form Welch's test expects."""
        return SummaryStat.from_values(self.values(metric), label or self.algo_id, ddof=1)

    def to_dict(self) -> dict:
        agg = self.aggregate()
        return {
            "algo_id": self.algo_id, "env_id": self.env_id, "quality": self.quality, "config_hash": self.config_hash,
            "protocol": self.protocol.to_dict(), "failed": self.failed,
            "errors": [list(e) for e in self.errors], "num_records": len(self.records),
            "aggregate": {m: {"mean": v[0], "std": v[1]} for m, v in agg.items()},
            "std_convention": "population",
            "records": [r.to_dict() for r in self.records],
        }

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentResult:
        return cls(d["algo_id"], d["env_id"], d["config_hash"], EvalProtocol.from_dict(d["protocol"]),
                   [RunRecord.from_dict(r) for r in d["records"]], d.get("failed", False),
                   [tuple(e) for e in d.get("errors", [])], d.get("quality", ""))


@dataclass(frozen=True)
class CheckpointRow:
    update: int
    mean: float
    std: float  # population, over seeds
    n: int


def checkpoint_report(result: ExperimentResult, checkpoints: Sequence[int]) -> list[CheckpointRow]:
    """Mean and std over seeds of the evaluation return at each checkpoint."""
    if not result.records:
        raise ProtocolError("experiment has no run records")
    rows = []
    for c in sorted(set(int(c) for c in checkpoints)):
        vals = np.array([r.at(c) for r in result.records])
        rows.append(CheckpointRow(c, float(vals.mean()), float(vals.std()), len(vals)))
    return rows


def preferred_by_checkpoint(results: dict[str, ExperimentResult], checkpoints: Sequence[int]) -> dict[int, str]:
    """Label of the algorithm with the highest mean return at each checkpoint
    (first label in insertion order on ties)."""
    reports = {label: {row.update: row.mean for row in checkpoint_report(res, checkpoints)}
               for label, res in results.items()}
    out = {}
    for c in sorted(set(int(c) for c in checkpoints)):
        best = max(reports.values(), key=lambda rep: rep[c])[c]
        out[c] = next(label for label, rep in reports.items() if rep[c] == best)
    return out

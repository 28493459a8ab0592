"""Fixed-budget offline training, 32-episode evaluation and multi-seed experiments."""

from .evaluation import GreedyActor, check_matches, evaluate, rollout_returns
from .protocol import (
    METRICS,
    PAPER_SCALE_BUDGETS,
    CheckpointRow,
    EvalProtocol,
    ExperimentResult,
    RunRecord,
    checkpoint_report,
    preferred_by_checkpoint,
)
from .training import (
    JsonlSink,
    RunOutput,
    config_hash,
    fixed_clock,
    run_experiment,
    train_offline,
    train_run,
    vault_digest,
)

__all__ = [
    "CheckpointRow", "EvalProtocol", "ExperimentResult", "GreedyActor", "JsonlSink", "METRICS",
    "PAPER_SCALE_BUDGETS", "RunOutput", "RunRecord", "check_matches", "checkpoint_report", "config_hash",
    "evaluate", "fixed_clock", "preferred_by_checkpoint", "rollout_returns", "run_experiment",
    "train_offline", "train_run", "vault_digest",
]

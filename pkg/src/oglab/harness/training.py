"""Fixed-budget offline training runs and multi-seed experiments.

Streams per run seed ``s``: network initialisation draws from
``derive_rng(s, INIT_STREAM)``, batch sampling and algorithm noise from
``derive_rng(s, TRAIN_STREAM)``, evaluation resets from the EVAL stream (see
``evaluation``). Evaluation results flow only into the run record and the log.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from ..baselines import AgentBundle, HyperParams, check_compatible, save_bundle
from ..envs import REGISTRY, make_env
from ..errors import ConfigurationError, NumericError, OglabError
from ..seeding import INIT_STREAM, TRAIN_STREAM, derive_rng
from ..vault import Vault, sample_sequences, vault_to_bytes
from .evaluation import evaluate
from .protocol import EvalProtocol, ExperimentResult, RunRecord

log = logging.getLogger(__name__)

Clock = Callable[[], float]
Sink = Callable[[dict], None]


class JsonlSink:
    """Append-only JSON-lines log; writes from concurrent runs are serialised."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def __call__(self, record: dict) -> None:
        line = json.dumps(record, sort_keys=True)
        with self._lock, open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")


def fixed_clock() -> float:
    """Stand-in clock for runs whose logs must be byte-reproducible."""
    return 0.0


def vault_digest(vault: Vault) -> str:
    return hashlib.sha256(vault_to_bytes(vault.header, vault.episodes)).hexdigest()


def config_hash(algo_id: str, vault_sha: str, hp: HyperParams, protocol: EvalProtocol) -> str:
    """Identity of a configuration, independent of the run seed."""
    payload = {"algo_id": algo_id, "vault_sha256": vault_sha, "hyperparameters": hp.to_dict(),
               "protocol": {**protocol.to_dict(), "num_seeds": None}}
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


@dataclass
class RunOutput:
    record: RunRecord
    bundle: AgentBundle


def _validate_run(algo_id: str, vault: Vault):
    env_id = vault.header.env_id
    if env_id not in REGISTRY:
        raise ConfigurationError(f"vault environment {env_id!r} is not available")
    return check_compatible(algo_id, vault.header.action_spec)


def train_run(algo_id: str, vault: Vault, hp: HyperParams, protocol: EvalProtocol, seed: int, *,
              sink: Sink | None = None, clock: Clock = time.perf_counter, checkpoint_dir: str | Path | None = None,
              cfg_hash: str | None = None, evaluator=evaluate) -> RunOutput:
    """Exactly ``protocol.update_budget`` updates; an evaluation after every
    ``eval_every`` updates and at each checkpoint update."""
    algo = _validate_run(algo_id, vault)
    env = make_env(vault.header.env_id)
    cfg_hash = cfg_hash or config_hash(algo_id, vault_digest(vault), hp, protocol)
    run_id = f"{algo_id}-{cfg_hash[:12]}-s{seed}"
    start = clock()
    bundle = algo.init(env.spec, hp, derive_rng(seed, INIT_STREAM))
    rng = derive_rng(seed, TRAIN_STREAM)
    points = protocol.eval_points()
    saves = set(protocol.checkpoints) | {protocol.update_budget}
    series: list[tuple[int, float]] = []
    next_point = 0
    for u in range(1, protocol.update_budget + 1):
        batch = sample_sequences(vault, hp.batch_size, None, rng)
        try:
            bundle, _ = algo.update(bundle, batch, hp, rng)
        except NumericError as e:
            raise NumericError(f"{run_id}: {e}", step=u) from e
        if next_point < len(points) and u == points[next_point]:
            mean = evaluator(bundle, env, protocol, seed, next_point)
            series.append((u, mean))
            if sink is not None:
                sink({"run_id": run_id, "seed": seed, "update": u, "eval_mean_return": mean,
                      "wall_clock_s": round(clock() - start, 6)})
            next_point += 1
        if checkpoint_dir is not None and u in saves:
            save_bundle(Path(checkpoint_dir) / f"update_{u:07d}", bundle)
    if bundle.updates != protocol.update_budget:
        raise OglabError(f"{run_id}: performed {bundle.updates} updates, budget {protocol.update_budget}")
    record = RunRecord.from_series(cfg_hash, seed, series, clock() - start, bundle.digest(),
                                   updates=bundle.updates, episodes_evaluated=len(series) * protocol.eval_episodes)
    return RunOutput(record, bundle)


def train_offline(algo_id: str, vault: Vault, hp: HyperParams, protocol: EvalProtocol, seed: int,
                  **kw) -> RunRecord:
    return train_run(algo_id, vault, hp, protocol, seed, **kw).record


def run_experiment(algo_id: str, vault: Vault, hp: HyperParams, protocol: EvalProtocol, *,
                   sink: Sink | None = None, clock: Clock = time.perf_counter, workers: int = 1,
                   checkpoint_root: str | Path | None = None) -> ExperimentResult:
    """Seeds ``0 .. num_seeds - 1``. A failing seed marks the experiment failed; the
    remaining seeds still run and their records are kept."""
    if protocol.num_seeds < 2:
        raise ConfigurationError("an experiment needs num_seeds >= 2")
    _validate_run(algo_id, vault)
    cfg_hash = config_hash(algo_id, vault_digest(vault), hp, protocol)

    def one(seed: int) -> RunRecord:
        ckpt = None if checkpoint_root is None else Path(checkpoint_root) / f"seed_{seed}"
        return train_offline(algo_id, vault, hp, protocol, seed, sink=sink, clock=clock, checkpoint_dir=ckpt,
                             cfg_hash=cfg_hash)

    seeds = list(range(protocol.num_seeds))
    outcomes: dict[int, RunRecord | BaseException] = {}
    if workers <= 1:
        for s in seeds:
            try:
                outcomes[s] = one(s)
            except OglabError as e:
                outcomes[s] = e
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {s: pool.submit(one, s) for s in seeds}
            for s, fut in futures.items():
                try:
                    outcomes[s] = fut.result()
                except OglabError as e:
                    outcomes[s] = e
    records, errors = [], []
    for s in seeds:
        out = outcomes[s]
        if isinstance(out, RunRecord):
            records.append(out)
        else:
            log.error("seed %d failed: %s", s, out)
            errors.append((s, f"{type(out).__name__}: {out}"))
    return ExperimentResult(algo_id, vault.header.env_id, cfg_hash, protocol, records, bool(errors), errors,
                            vault.header.quality)

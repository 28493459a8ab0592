"""The four offline baselines and greedy action selection."""

from __future__ import annotations

import json
from pathlib import Path
from types import ModuleType

import numpy as np

from ..envs.base import ActionSpec, EnvSpec
from ..errors import ConfigurationError
from ..netcore import forward, initial_hidden, load_params, save_params
from . import bc, iddpg_bc, iql_cql, maddpg_cql
from .common import AgentBundle, HyperParams, with_agent_ids

ALGORITHMS: dict[str, ModuleType] = {m.ALGO_ID: m for m in (bc, iql_cql, iddpg_bc, maddpg_cql)}


def get_algorithm(algo_id: str) -> ModuleType:
    try:
        return ALGORITHMS[algo_id]
    except KeyError:
        raise ConfigurationError(f"unknown algorithm {algo_id!r}; known: {sorted(ALGORITHMS)}") from None


def check_compatible(algo_id: str, action_spec: ActionSpec) -> ModuleType:
    algo = get_algorithm(algo_id)
    if algo.ACTION_KIND != action_spec.kind:
        raise ConfigurationError(f"{algo_id} needs {algo.ACTION_KIND} actions, dataset has {action_spec.kind}")
    return algo


def init_bundle(algo_id: str, spec: EnvSpec, hp: HyperParams, rng: np.random.Generator) -> AgentBundle:
    return check_compatible(algo_id, spec.action_spec).init(spec, hp, rng)


def initial_state(bundle: AgentBundle) -> list[np.ndarray]:
    """Zeroed recurrent state for every agent of the acting network."""
    actor = get_algorithm(bundle.algo_id).ACTOR
    return initial_hidden(bundle.networks[actor], bundle.num_agents)


def select_actions(bundle: AgentBundle, observations: np.ndarray, recurrent_state: list[np.ndarray],
                   legal: np.ndarray | None = None, mode: str = "greedy") -> tuple[np.ndarray, list[np.ndarray]]:
    """Greedy joint action for one environment step.

    Discrete: argmax over legal Q-values / logits, lowest index on ties.
    Continuous: the deterministic policy output.
    """
    if mode != "greedy":
        raise ConfigurationError("only greedy action selection is supported")
    actor = bundle.networks[get_algorithm(bundle.algo_id).ACTOR]
    x = with_agent_ids(np.asarray(observations, dtype=np.float32)[None])
    trace = forward(actor, x, None, h0=recurrent_state)
    out = trace.output[0]
    if bundle.action_spec.discrete:
        return greedy_discrete(out, legal), trace.final_hidden
    return out.astype(np.float64), trace.final_hidden


def greedy_discrete(values: np.ndarray, legal: np.ndarray | None = None) -> np.ndarray:
    values = np.asarray(values)
    if legal is not None:
        values = np.where(legal, values, -np.inf)
    return values.argmax(axis=-1)


# -- bundle checkpoints ------------------------------------------------------------

def save_bundle(directory: str | Path, bundle: AgentBundle) -> Path:
    """Write ``bundle.json`` plus one OGNP file per online and target network."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    meta = {
        "algo_id": bundle.algo_id, "env_id": bundle.env_id, "num_agents": bundle.num_agents,
        "obs_dim": bundle.obs_dim, "state_dim": bundle.state_dim,
        "action_spec": bundle.action_spec.to_dict(), "updates": bundle.updates,
        "networks": sorted(bundle.networks), "targets": sorted(bundle.targets),
    }
    (directory / "bundle.json").write_text(json.dumps(meta, sort_keys=True, indent=1) + "\n")
    for name, p in bundle.networks.items():
        save_params(directory / f"{name}.ognp", p)
    for name, p in bundle.targets.items():
        save_params(directory / f"target_{name}.ognp", p)
    return directory


def load_bundle(directory: str | Path) -> AgentBundle:
    directory = Path(directory)
    meta = json.loads((directory / "bundle.json").read_text())
    return AgentBundle(
        algo_id=meta["algo_id"], env_id=meta["env_id"], num_agents=meta["num_agents"],
        obs_dim=meta["obs_dim"], state_dim=meta["state_dim"],
        action_spec=ActionSpec.from_dict(meta["action_spec"]),
        networks={n: load_params(directory / f"{n}.ognp") for n in meta["networks"]},
        targets={n: load_params(directory / f"target_{n}.ognp") for n in meta["targets"]},
        updates=meta["updates"],
    )


__all__ = [
    "ALGORITHMS", "AgentBundle", "HyperParams", "check_compatible", "get_algorithm", "greedy_discrete",
    "init_bundle", "initial_state", "load_bundle", "save_bundle", "select_actions",
]

"""Greedy evaluation roll-outs.

Episode ``k`` of evaluation ``j`` in the run with seed ``s`` resets the
environment with ``derive_seed(s, EVAL_STREAM, j, k)``. Nothing else is random
during evaluation, so the result depends only on the parameters and those keys.
"""

from __future__ import annotations

from typing import Callable, Protocol

import numpy as np

from ..baselines import AgentBundle, initial_state, select_actions
from ..envs import make_env
from ..envs.base import TimeStep
from ..errors import ConfigurationError
from ..seeding import EVAL_STREAM, derive_seed
from .protocol import EvalProtocol


class Actor(Protocol):
    def begin_episode(self) -> None: ...

    def act(self, ts: TimeStep) -> np.ndarray: ...


class GreedyActor:
    """Acts greedily with a bundle's actor network, carrying its recurrent state."""

    def __init__(self, bundle: AgentBundle):
        self.bundle = bundle
        self.hidden: list[np.ndarray] = []

    def begin_episode(self) -> None:
        self.hidden = initial_state(self.bundle)

    def act(self, ts: TimeStep) -> np.ndarray:
        actions, self.hidden = select_actions(self.bundle, ts.observations, self.hidden, ts.legal_actions)
        return actions


def check_matches(bundle: AgentBundle, env) -> None:
    spec = env.spec
    mine = (bundle.num_agents, bundle.obs_dim, bundle.state_dim, bundle.action_spec)
    theirs = (spec.num_agents, spec.obs_dim, spec.state_dim, spec.action_spec)
    if mine != theirs:
        raise ConfigurationError(f"bundle for {bundle.env_id} does not fit environment {spec.env_id}")


Reset = Callable[[object, int], TimeStep]


def rollout_returns(actor: Actor, env, episodes: int, seed: int, eval_index: int = 0,
                    reset: Reset | None = None) -> np.ndarray:
    """Undiscounted team return of each of ``episodes`` episodes.

    ``reset(env, reset_seed)`` overrides the start-state draw (e.g. fixed starts).
    """
    if episodes < 1:
        raise ConfigurationError("need at least one evaluation episode")
    out = np.empty(episodes, dtype=np.float64)
    for k in range(episodes):
        reset_seed = derive_seed(seed, EVAL_STREAM, eval_index, k)
        ts = env.reset(reset_seed) if reset is None else reset(env, reset_seed)
        actor.begin_episode()
        total = 0.0
        while not ts.last:
            ts = env.step(actor.act(ts))
            total += ts.team_reward
        out[k] = total
    return out


def evaluate(bundle: AgentBundle, env, protocol: EvalProtocol, seed: int, eval_index: int = 0,
             reset: Reset | None = None) -> float:
    """Mean return of ``protocol.eval_episodes`` greedy episodes. Reads the bundle only."""
    env = make_env(bundle.env_id) if env is None else env
    check_matches(bundle, env)
    return float(rollout_returns(GreedyActor(bundle), env, protocol.eval_episodes, seed, eval_index, reset).mean())

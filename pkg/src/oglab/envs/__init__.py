"""Desk-scale cooperative environments, scripted behaviour policies and normalisation bounds."""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..errors import ConfigurationError
from ..seeding import ORACLE_STREAM, derive_rng, derive_seed
from .base import ActionSpec, EnvSpec, TimeStep, greedy_assignment
from .gridspread import GridSpread
from .pointspread import PointSpread

REGISTRY: dict[str, Callable[[], object]] = {
    "gridspread-3": GridSpread,
    "pointspread-3": PointSpread,
}

QUALITY_EPSILON = {"good": 0.05, "medium": 0.4, "poor": 0.8}

Selector = Callable[[object], np.ndarray]


def make_env(env_id: str):
    try:
        return REGISTRY[env_id]()
    except KeyError:
        raise ConfigurationError(f"unknown env id {env_id!r}; known: {sorted(REGISTRY)}") from None


def env_spec(env_id: str) -> EnvSpec:
    return make_env(env_id).spec


def behaviour_policy(env, quality: str | float, rng: np.random.Generator) -> Selector:
    """Per-agent epsilon-mixture of the expert planner and uniform random actions.

    ``quality`` is a tier name (good/medium/poor) or an explicit epsilon.
    """
    if isinstance(quality, str):
        if quality not in QUALITY_EPSILON:
            raise ConfigurationError(f"unknown quality tier {quality!r}")
        eps = QUALITY_EPSILON[quality]
    else:
        eps = float(quality)
        if not 0.0 <= eps <= 1.0:
            raise ConfigurationError(f"epsilon must lie in [0, 1], got {eps}")

    def select(e) -> np.ndarray:
        expert = e.expert_actions()
        if eps == 0.0:
            return expert
        random = e.random_actions(rng)
        if eps == 1.0:
            return random
        explore = rng.random(e.num_agents) < eps
        out = expert.copy()
        out[explore] = random[explore]
        return out

    return select


def episode_return(env, select: Selector, seed: int) -> float:
    ts = env.reset(seed)
    total = 0.0
    while not ts.last:
        ts = env.step(select(env))
        total += ts.team_reward
    return total


def oracle_bounds(env_id: str, num_episodes: int, seed: int) -> tuple[float, float]:
    """Mean episode return of the uniform-random policy and of the expert planner.

    Both policies see the same start states (episode ``k`` resets with
    ``derive_seed(seed, ORACLE_STREAM, k)``).
    """
    if num_episodes < 1:
        raise ConfigurationError("num_episodes must be >= 1")
    env = make_env(env_id)
    randoms, experts = [], []
    for k in range(num_episodes):
        reset_seed = derive_seed(seed, ORACLE_STREAM, k)
        rng = derive_rng(seed, ORACLE_STREAM, k, 1)
        randoms.append(episode_return(env, lambda e: e.random_actions(rng), reset_seed))
        experts.append(episode_return(env, lambda e: e.expert_actions(), reset_seed))
    return float(np.mean(randoms)), float(np.mean(experts))


__all__ = [
    "ActionSpec", "EnvSpec", "GridSpread", "PointSpread", "QUALITY_EPSILON", "REGISTRY", "TimeStep",
    "behaviour_policy", "env_spec", "episode_return", "greedy_assignment", "make_env", "oracle_bounds",
]

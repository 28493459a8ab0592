from __future__ import annotations

import numpy as np

from ..envs import QUALITY_EPSILON, behaviour_policy, make_env
from ..errors import ConfigurationError
from ..seeding import DATASET_STREAM, derive_rng, derive_seed
from .format import Episode, Vault, VaultHeader

TIERS = ("good", "medium", "poor")
QUALITIES = TIERS + ("mixed",)


def record_episode(env, select, reset_seed: int) -> Episode:
    ts = env.reset(reset_seed)
    obs, states, acts, rews, terms, legal = [], [], [], [], [], []
    while not ts.last:
        a = select(env)
        obs.append(ts.observations)
        states.append(ts.state)
        legal.append(ts.legal_actions)
        acts.append(a)
        ts = env.step(a)
        rews.append(ts.team_reward)
        terms.append(ts.terminal)
    discrete = env.spec.action_spec.discrete
    return Episode(
        observations=np.stack(obs).astype(np.float32),
        state=np.stack(states).astype(np.float32),
        actions=np.stack(acts).astype(np.int32 if discrete else np.float32),
        rewards=np.array(rews, dtype=np.float32),
        terminals=np.array(terms, dtype=bool),
        legal=np.stack(legal).astype(bool) if discrete else None,
    )


def _describe(quality: str) -> str:
    if quality == "mixed":
        parts = ", ".join(f"{t} eps={QUALITY_EPSILON[t]}" for t in TIERS)
        return f"equal thirds of per-agent epsilon-mixtures of the greedy-assignment expert and uniform random ({parts})"
    return f"per-agent epsilon-mixture of the greedy-assignment expert and uniform random, eps={QUALITY_EPSILON[quality]}"


def generate_dataset(env_id: str, quality: str, num_episodes: int, seed: int) -> Vault:
    """Roll out the quality tier's behaviour policy; ``mixed`` takes
    ``num_episodes // 3`` episodes from each of good, medium and poor.

    Episode ``k`` of tier ``j`` resets with ``derive_seed(seed, DATASET_STREAM, j, k)``
    and draws its behaviour randomness from ``derive_rng(seed, DATASET_STREAM, j, k, 1)``.
    """
    if quality not in QUALITIES:
        raise ConfigurationError(f"quality must be one of {QUALITIES}, got {quality!r}")
    if num_episodes < 1:
        raise ConfigurationError("num_episodes must be >= 1")
    env = make_env(env_id)
    if quality == "mixed":
        per_tier = num_episodes // 3
        if per_tier < 1:
            raise ConfigurationError("a mixed vault needs at least 3 episodes")
        plan = [(t, per_tier) for t in TIERS]
    else:
        plan = [(quality, num_episodes)]
    episodes = []
    for tier, count in plan:
        j = TIERS.index(tier)
        for k in range(count):
            rng = derive_rng(seed, DATASET_STREAM, j, k, 1)
            episodes.append(record_episode(env, behaviour_policy(env, tier, rng), derive_seed(seed, DATASET_STREAM, j, k)))
    spec = env.spec
    header = VaultHeader(
        env_id=env_id,
        scenario=env_id,
        quality=quality,
        num_agents=spec.num_agents,
        obs_dim=spec.obs_dim,
        state_dim=spec.state_dim,
        action_spec=spec.action_spec,
        episode_limit=spec.episode_limit,
        episode_count=len(episodes),
        transition_count=sum(len(e) for e in episodes),
        behaviour_policy=_describe(quality),
        creation_seed=int(seed),
    )
    return Vault(header, episodes)

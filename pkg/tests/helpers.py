"""Shared fixtures: tiny vaults, batches and loss closures for every network topology."""

from __future__ import annotations

import numpy as np

from oglab.baselines import HyperParams, init_bundle
from oglab.baselines import bc, iddpg_bc, iql_cql, maddpg_cql
from oglab.baselines.common import agent_inputs, time_major
from oglab.envs import env_spec
from oglab.netcore import forward
from oglab.vault import generate_dataset, sample_sequences

SMALL = dict(linear_width=6, gru_width=5, critic_widths=(7, 6))

_VAULTS = {}


def tiny_vault(env_id: str, quality: str = "medium", episodes: int = 6, seed: int = 0):
    key = (env_id, quality, episodes, seed)
    if key not in _VAULTS:
        _VAULTS[key] = generate_dataset(env_id, quality, episodes, seed)
    return _VAULTS[key]


def tiny_batch(env_id: str, rng: np.random.Generator, batch_size: int = 2, seq_len: int = 4, truncate: bool = True):
    """A short batch; with ``truncate`` the last sequence loses its final steps so padding is exercised."""
    batch = sample_sequences(tiny_vault(env_id), batch_size, seq_len, rng)
    if truncate:
        batch.mask[-1, seq_len - 1:] = False
        batch = batch.with_padding(0.0)
    return batch


def small_bundle(algo_id: str, env_id: str, rng: np.random.Generator, **hp):
    hp = HyperParams.for_algo(algo_id, **{**SMALL, **hp})
    bundle = init_bundle(algo_id, env_spec(env_id), hp, rng)
    bundle.networks = {k: randomized(v, rng) for k, v in bundle.networks.items()}
    bundle.targets = {k: randomized(v, rng) for k, v in bundle.targets.items()}
    return bundle, hp


def randomized(params, rng):
    """Float64 copy with random biases, so no ReLU sits exactly at its kink."""
    p = params.astype(np.float64)
    for name, t in p.tensors.items():
        if name.endswith(".b"):
            t[...] = rng.normal(0.0, 0.1, size=t.shape)
    return p


# Each builder returns (params, loss_and_grad) for one network of one algorithm, with every
# stochastic or batch-derived constant (random CQL actions, noise, lambda, targets) frozen so
# the loss is a smooth deterministic function of the parameters.

def bc_policy_case(rng):
    bundle, _ = small_bundle("bc", "gridspread-3", rng)
    inp = agent_inputs(tiny_batch("gridspread-3", rng))
    return bundle.networks["policy"], lambda p: bc.bc_loss(p, inp.x, inp.resets, inp.actions, inp.legal, inp.mask)


def iql_q_case(rng):
    bundle, hp = small_bundle("iql_cql", "gridspread-3", rng)
    inp = agent_inputs(tiny_batch("gridspread-3", rng))
    q_t = forward(bundle.targets["q"], inp.x, inp.resets).output
    legal = np.where(inp.mask[..., None], inp.legal, True)
    y, valid = iql_cql.td_target(inp.rewards, inp.terminals, inp.mask, legal, q_t, hp.gamma)
    rand = iql_cql.sample_legal_actions(legal, hp.cql_num_actions, rng)

    def f(p):
        loss, g, _ = iql_cql.iql_cql_loss(p, inp.x, inp.resets, inp.actions, inp.mask, y, valid, rand, hp.cql_weight)
        return loss, g

    return bundle.networks["q"], f


def _continuous_setup(algo_id, rng):
    bundle, hp = small_bundle(algo_id, "pointspread-3", rng)
    batch = tiny_batch("pointspread-3", rng)
    return bundle, hp, batch, agent_inputs(batch)


def iddpg_critic_case(rng):
    bundle, hp, batch, inp = _continuous_setup("iddpg_bc", rng)
    ctx = iddpg_bc.critic_context(batch)
    y = rng.normal(size=inp.mask.shape)
    valid = inp.mask
    cin = ctx.inputs(inp.actions.astype(np.float64))
    return bundle.networks["critic"], lambda p: iddpg_bc.critic_mse_loss(p, cin, y, valid)


def iddpg_policy_case(rng):
    bundle, hp, batch, inp = _continuous_setup("iddpg_bc", rng)
    ctx = iddpg_bc.critic_context(batch)
    critic = bundle.networks["critic"]
    lam = float(rng.uniform(0.2, 3.0))

    def f(p):
        loss, g, _ = iddpg_bc.policy_loss(p, critic, ctx, inp.x, inp.resets, inp.actions, inp.mask,
                                          hp.bc_weight, lam=lam)
        return loss, g

    return bundle.networks["policy"], f


def maddpg_critic_case(rng):
    bundle, hp, batch, inp = _continuous_setup("maddpg_cql", rng)
    N = bundle.num_agents
    state = time_major(batch.state).astype(np.float64)
    mask = time_major(batch.mask)
    joint_data = maddpg_cql.joint(inp.actions.astype(np.float64), N)
    pi = maddpg_cql.joint(forward(bundle.networks["policy"], inp.x, inp.resets).output, N)
    noisy = maddpg_cql.noisy_actions(pi, hp.cql_sigma, 3, rng)
    y = rng.normal(size=mask.shape)

    def f(p):
        loss, g, _ = maddpg_cql.critic_cql_loss(p, state, joint_data, y, mask, mask, noisy, hp.cql_weight)
        return loss, g

    return bundle.networks["critic"], f


def maddpg_policy_case(rng):
    bundle, hp, batch, inp = _continuous_setup("maddpg_cql", rng)
    N = bundle.num_agents
    state = time_major(batch.state).astype(np.float64)
    mask = time_major(batch.mask)
    joint_data = maddpg_cql.joint(inp.actions.astype(np.float64), N)
    critic = bundle.networks["critic"]
    return bundle.networks["policy"], lambda p: maddpg_cql.policy_loss(p, critic, inp.x, inp.resets, state,
                                                                       joint_data, mask, N)


GRAD_CASES = {
    "bc/policy": bc_policy_case,
    "iql_cql/q": iql_q_case,
    "iddpg_bc/critic": iddpg_critic_case,
    "iddpg_bc/policy": iddpg_policy_case,
    "maddpg_cql/critic": maddpg_critic_case,
    "maddpg_cql/policy": maddpg_policy_case,
}

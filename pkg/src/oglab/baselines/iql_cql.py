"""Independent recurrent Q-learners with a conservative (CQL) penalty, discrete actions.

The CQL term is the gap form: for every (step, agent) it averages the Q-values
of ``cql_num_actions`` uniformly sampled legal actions and subtracts the Q-value
of the dataset action. Each agent's Q-network only scores its own action, so
random actions are drawn per agent.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..envs.base import EnvSpec
from ..errors import DataError, NumericError
from ..netcore import NetworkParams, adam_update, backward, forward, init_params, recurrent_topology
from ..vault.sampler import SequenceBatch
from .bc import first_bad_step
from .common import AgentBundle, HyperParams, agent_inputs, bundle_skeleton, make_optim, shift_next, td_valid

ALGO_ID = "iql_cql"
ACTION_KIND = "discrete"
ACTOR = "q"


def init(spec: EnvSpec, hp: HyperParams, rng: np.random.Generator) -> AgentBundle:
    n = spec.num_agents
    topo = recurrent_topology(spec.obs_dim + n, hp.linear_width, hp.gru_width, spec.action_spec.size)
    q = init_params(topo, rng)
    return AgentBundle(**bundle_skeleton(ALGO_ID, spec), networks={"q": q}, targets={"q": q.copy()},
                       optim={"q": make_optim(q, hp.q_lr, hp)})


def td_target(rewards, terminals, mask, legal, q_target_out, gamma) -> tuple[np.ndarray, np.ndarray]:
    """y_t = r_t + gamma * (1 - terminal_t) * max over legal a' of Q_target(o_{t+1}, a').

    Returns (y, valid) where ``valid`` marks steps with a defined target.
    """
    valid = td_valid(mask, terminals)
    boot = valid & ~terminals
    next_legal = shift_next(legal)
    if np.any(boot & ~next_legal.any(-1)):
        t = int(np.argwhere(boot & ~next_legal.any(-1))[0][0])
        raise DataError(f"no legal next action to bootstrap from at step {t}")
    next_max = np.where(next_legal, shift_next(q_target_out), -np.inf).max(-1)
    y = rewards + rewards.dtype.type(gamma) * np.where(boot, next_max, 0).astype(rewards.dtype)
    return y, valid


def sample_legal_actions(legal: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` independent uniform draws from each row's legal actions: (..., count)."""
    keys = rng.random(legal.shape[:-1] + (count, legal.shape[-1]))
    keys = np.where(legal[..., None, :], keys, -1.0)
    return keys.argmax(-1)


def iql_cql_loss(q_params: NetworkParams, x, resets, actions, mask, y, valid, random_actions,
                 cql_weight: float) -> tuple[float, NetworkParams, dict[str, float]]:
    """TD mean-squared error plus ``cql_weight`` times the masked mean CQL gap."""
    trace = forward(q_params, x, resets)
    q = trace.output
    A = q.shape[-1]
    a = np.where(mask, actions, 0).astype(np.int64)
    qa = np.take_along_axis(q, a[..., None], -1)[..., 0]
    n_td = max(int(valid.sum()), 1)
    n = max(int(mask.sum()), 1)
    err = np.where(valid, qa - y, 0)
    if not np.all(np.isfinite(err)):
        raise NumericError("non-finite TD error", step=first_bad_step(err))
    td = float(np.sum(err * err, dtype=np.float64) / n_td)
    K = random_actions.shape[-1]
    q_rand = np.take_along_axis(q, random_actions, -1).mean(-1)
    gap = np.where(mask, q_rand - qa, 0)
    cql = float(cql_weight * np.sum(gap, dtype=np.float64) / n)

    onehot_a = (a[..., None] == np.arange(A)).astype(q.dtype)
    rand_counts = (random_actions[..., None] == np.arange(A)).sum(-2).astype(q.dtype)
    dq = onehot_a * (2 * err / n_td)[..., None]
    dq += np.where(mask[..., None], cql_weight * (rand_counts / K - onehot_a) / n, 0).astype(q.dtype)
    grads, _ = backward(q_params, trace, dq)
    return td + cql, grads, {"td_loss": td, "cql_loss": cql}


def update(bundle: AgentBundle, batch: SequenceBatch, hp: HyperParams,
           rng: np.random.Generator) -> tuple[AgentBundle, dict[str, float]]:
    inp = agent_inputs(batch)
    legal = np.ones(inp.actions.shape + (bundle.action_spec.size,), bool) if inp.legal is None else inp.legal
    legal_eff = np.where(inp.mask[..., None], legal, True)
    q_target_out = forward(bundle.targets["q"], inp.x, inp.resets).output
    y, valid = td_target(inp.rewards, inp.terminals, inp.mask, legal_eff, q_target_out, hp.gamma)
    rand = sample_legal_actions(legal_eff, hp.cql_num_actions, rng)
    loss, grads, info = iql_cql_loss(bundle.networks["q"], inp.x, inp.resets, inp.actions, inp.mask, y, valid,
                                     rand, hp.cql_weight)
    q, opt = adam_update(bundle.optim["q"], bundle.networks["q"], grads)
    updates = bundle.updates + 1
    target = q.copy() if updates % hp.target_period == 0 else bundle.targets["q"]
    new = replace(bundle, networks={"q": q}, targets={"q": target}, optim={"q": opt}, updates=updates)
    info["loss"] = loss
    return new, info


def random_action_q(bundle: AgentBundle, batch: SequenceBatch, num_actions: int, rng: np.random.Generator) -> float:
    """Mean Q-value of uniformly sampled legal actions over every valid (step, agent) of ``batch``."""
    inp = agent_inputs(batch)
    legal = np.ones(inp.actions.shape + (bundle.action_spec.size,), bool) if inp.legal is None else inp.legal
    legal = np.where(inp.mask[..., None], legal, True)
    q = forward(bundle.networks["q"], inp.x, inp.resets).output
    rand = sample_legal_actions(legal, num_actions, rng)
    q_rand = np.take_along_axis(q, rand, -1).mean(-1)
    n = max(int(inp.mask.sum()), 1)
    return float(np.sum(np.where(inp.mask, q_rand, 0), dtype=np.float64) / n)

"""MADDPG with a conservative critic (continuous actions).

One centralised critic scores Q(state, joint action). CQL pushes down the value
of ``cql_num_actions`` noisy copies of the current joint policy action,
clip(pi(o) + N(0, sigma^2), -1, 1), and pushes up the dataset joint action.
Each agent's policy ascends Q with only its own action slot replaced by pi(o_i).
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..envs.base import EnvSpec
from ..errors import NumericError
from ..netcore import (
    NetworkParams,
    Trace,
    adam_update,
    backward,
    forward,
    init_params,
    mlp_topology,
    polyak_update,
    recurrent_topology,
)
from ..vault.sampler import SequenceBatch
from .common import AgentBundle, HyperParams, agent_inputs, bundle_skeleton, make_optim, time_major
from .iddpg_bc import continuous_td_target

ALGO_ID = "maddpg_cql"
ACTION_KIND = "continuous"
ACTOR = "policy"


def init(spec: EnvSpec, hp: HyperParams, rng: np.random.Generator) -> AgentBundle:
    n, d = spec.num_agents, spec.action_spec.size
    policy = init_params(recurrent_topology(spec.obs_dim + n, hp.linear_width, hp.gru_width, d, "tanh"), rng)
    critic = init_params(mlp_topology(spec.state_dim + n * d, hp.critic_widths, 1), rng)
    return AgentBundle(
        **bundle_skeleton(ALGO_ID, spec),
        networks={"policy": policy, "critic": critic},
        targets={"policy": policy.copy(), "critic": critic.copy()},
        optim={"policy": make_optim(policy, hp.policy_lr, hp), "critic": make_optim(critic, hp.critic_lr, hp)},
    )


def joint(per_agent_actions: np.ndarray, num_agents: int) -> np.ndarray:
    """(L, B*N, d) -> (L, B, N*d)."""
    L, R, d = per_agent_actions.shape
    return per_agent_actions.reshape(L, R // num_agents, num_agents * d)


def noisy_actions(pi_joint: np.ndarray, sigma: float, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` clipped Gaussian perturbations of the joint policy action: (L, B, count, N*d)."""
    noise = rng.normal(0.0, sigma, size=pi_joint.shape[:-1] + (count, pi_joint.shape[-1]))
    return np.clip(pi_joint[..., None, :] + noise, -1.0, 1.0).astype(pi_joint.dtype)


def critic_cql_loss(critic: NetworkParams, state, joint_data, y, valid, mask, noisy,
                    cql_weight: float) -> tuple[float, NetworkParams, dict[str, float]]:
    """TD mean-squared error on dataset joint actions plus the CQL gap.

    ``state`` (L, B, S), ``joint_data`` (L, B, N*d), ``noisy`` (L, B, K, N*d).
    """
    K = noisy.shape[-2]
    acts = np.concatenate([joint_data[..., None, :], noisy], axis=-2)
    st = np.broadcast_to(state[..., None, :], acts.shape[:-1] + (state.shape[-1],))
    trace = forward(critic, np.concatenate([st, acts], axis=-1))
    q = trace.output[..., 0]
    q_data, q_noisy = q[..., 0], q[..., 1:]
    n_td = max(int(valid.sum()), 1)
    n = max(int(mask.sum()), 1)
    err = np.where(valid, q_data - y, 0)
    if not np.all(np.isfinite(err)):
        raise NumericError("non-finite critic TD error")
    td = float(np.sum(err * err, dtype=np.float64) / n_td)
    cql = float(cql_weight * np.sum(np.where(mask, q_noisy.mean(-1) - q_data, 0), dtype=np.float64) / n)
    dq = np.empty_like(q)
    m = mask.astype(q.dtype)
    dq[..., 0] = 2 * err / n_td - cql_weight * m / n
    dq[..., 1:] = (cql_weight * m / (n * K))[..., None]
    grads, _ = backward(critic, trace, dq[..., None])
    return td + cql, grads, {"td_loss": td, "cql_loss": cql}


def policy_loss(policy: NetworkParams, critic: NetworkParams, x, resets, state, joint_data, mask,
                num_agents: int, policy_trace: Trace | None = None) -> tuple[float, NetworkParams]:
    """-mean over valid steps and agents of Q(s, a_data with agent i's slot set to pi(o_i))."""
    ptrace = policy_trace or forward(policy, x, resets)
    pi = ptrace.output
    L, R, d = pi.shape
    N = num_agents
    B = R // N
    pi4 = pi.reshape(L, B, N, d)
    joint_rep = np.broadcast_to(joint_data.reshape(L, B, 1, N, d), (L, B, N, N, d)).copy()
    idx = np.arange(N)
    joint_rep[:, :, idx, idx, :] = pi4
    S = state.shape[-1]
    st = np.broadcast_to(state[:, :, None, :], (L, B, N, S))
    ctrace = forward(critic, np.concatenate([st, joint_rep.reshape(L, B, N, N * d)], axis=-1))
    q = ctrace.output[..., 0]
    n = max(int(mask.sum()), 1) * N
    loss = -float(np.sum(np.where(mask[..., None], q, 0), dtype=np.float64) / n)
    if not np.isfinite(loss):
        raise NumericError("non-finite policy loss")
    dq = np.broadcast_to(np.where(mask, -1.0 / n, 0)[..., None], q.shape).astype(critic.dtype)
    _, dcin = backward(critic, ctrace, dq[..., None], need_input_grad=True, param_grads=False)
    dact = dcin[..., S:].reshape(L, B, N, N, d)[:, :, idx, idx, :]
    grads, _ = backward(policy, ptrace, dact.reshape(L, R, d))
    return loss, grads


def update(bundle: AgentBundle, batch: SequenceBatch, hp: HyperParams,
           rng: np.random.Generator) -> tuple[AgentBundle, dict[str, float]]:
    N = bundle.num_agents
    inp = agent_inputs(batch)
    nets, targs, opts = bundle.networks, bundle.targets, bundle.optim
    state = time_major(batch.state.astype(np.float32))
    mask = time_major(batch.mask)
    terminals = time_major(batch.terminals)
    rewards = time_major(batch.rewards.astype(np.float32))
    joint_data = joint(inp.actions.astype(np.float32), N)

    pi_next = joint(forward(targs["policy"], inp.x, inp.resets).output, N)
    next_q = forward(targs["critic"], np.concatenate([state, pi_next], -1)).output[..., 0]
    y, valid = continuous_td_target(rewards, terminals, mask, next_q, hp.gamma)
    ptrace = forward(nets["policy"], inp.x, inp.resets)
    noisy = noisy_actions(joint(ptrace.output, N), hp.cql_sigma, hp.cql_num_actions, rng)
    closs, cgrads, info = critic_cql_loss(nets["critic"], state, joint_data, y, valid, mask, noisy, hp.cql_weight)
    critic, copt = adam_update(opts["critic"], nets["critic"], cgrads)

    ploss, pgrads = policy_loss(nets["policy"], critic, inp.x, inp.resets, state, joint_data, mask, N,
                                policy_trace=ptrace)
    policy, popt = adam_update(opts["policy"], nets["policy"], pgrads)

    rate = hp.target_update_rate
    new = replace(
        bundle,
        networks={"policy": policy, "critic": critic},
        targets={"policy": polyak_update(targs["policy"], policy, rate),
                 "critic": polyak_update(targs["critic"], critic, rate)},
        optim={"policy": popt, "critic": copt},
        updates=bundle.updates + 1,
    )
    info.update(critic_loss=closs, policy_loss=ploss)
    return new, info

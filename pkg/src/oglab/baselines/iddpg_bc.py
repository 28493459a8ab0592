"""Independent DDPG with a behaviour-cloning term (continuous actions).

Critic: Q(state, own action, agent id), feed-forward. Policy: recurrent,
tanh-squashed, conditioned on the agent's own observation history.
Policy loss = -lambda * mean Q(s, pi(o)) + mean ||pi(o) - a_data||^2 with
lambda = bc_weight / mean |Q(s, pi(o))| held constant within the update.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

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
from .common import (
    AgentBundle,
    HyperParams,
    agent_inputs,
    agent_major,
    bundle_skeleton,
    make_optim,
    per_agent,
    shift_next,
    td_valid,
)

log = logging.getLogger(__name__)

ALGO_ID = "iddpg_bc"
ACTION_KIND = "continuous"
ACTOR = "policy"


def init(spec: EnvSpec, hp: HyperParams, rng: np.random.Generator) -> AgentBundle:
    n, d = spec.num_agents, spec.action_spec.size
    policy = init_params(recurrent_topology(spec.obs_dim + n, hp.linear_width, hp.gru_width, d, "tanh"), rng)
    critic = init_params(mlp_topology(spec.state_dim + d + n, hp.critic_widths, 1), rng)
    return AgentBundle(
        **bundle_skeleton(ALGO_ID, spec),
        networks={"policy": policy, "critic": critic},
        targets={"policy": policy.copy(), "critic": critic.copy()},
        optim={"policy": make_optim(policy, hp.policy_lr, hp), "critic": make_optim(critic, hp.critic_lr, hp)},
    )


@dataclass
class CriticContext:
    """Per-agent critic conditioning, time-major: (L, B*N, ...)."""

    state: np.ndarray
    ids: np.ndarray

    def inputs(self, actions: np.ndarray) -> np.ndarray:
        return np.concatenate([self.state, actions, self.ids], axis=-1)


def critic_context(batch: SequenceBatch) -> CriticContext:
    B, L, N = batch.observations.shape[:3]
    ids = agent_major(np.broadcast_to(np.eye(N, dtype=np.float32), (B, L, N, N)))
    return CriticContext(per_agent(batch.state.astype(np.float32), N), ids)


def continuous_td_target(rewards, terminals, mask, next_q, gamma) -> tuple[np.ndarray, np.ndarray]:
    """y_t = r_t + gamma * (1 - terminal_t) * next_q_{t+1}; ``next_q`` is aligned with t."""
    valid = td_valid(mask, terminals)
    boot = valid & ~terminals
    y = rewards + rewards.dtype.type(gamma) * np.where(boot, shift_next(next_q), 0).astype(rewards.dtype)
    return y, valid


def critic_mse_loss(critic: NetworkParams, inputs, y, valid) -> tuple[float, NetworkParams]:
    trace = forward(critic, inputs)
    q = trace.output[..., 0]
    n = max(int(valid.sum()), 1)
    err = np.where(valid, q - y, 0)
    if not np.all(np.isfinite(err)):
        raise NumericError("non-finite critic TD error")
    grads, _ = backward(critic, trace, (2 * err / n)[..., None])
    return float(np.sum(err * err, dtype=np.float64) / n), grads


def bc_lambda(q: np.ndarray, mask: np.ndarray, bc_weight: float, floor: float) -> float:
    n = max(int(mask.sum()), 1)
    mean_abs = float(np.sum(np.where(mask, np.abs(q), 0), dtype=np.float64) / n)
    if mean_abs < floor:
        log.warning("mean |Q| = %.3g below floor %.1g; lambda uses the floor", mean_abs, floor)
    return bc_weight / max(mean_abs, floor)


def policy_loss(policy: NetworkParams, critic: NetworkParams, ctx: CriticContext, x, resets, data_actions, mask,
                bc_weight: float, floor: float = 1e-6, lam: float | None = None, bc_scale: float = 1.0,
                policy_trace: Trace | None = None) -> tuple[float, NetworkParams, dict[str, float]]:
    """DPG term plus behaviour cloning; ``lam`` overrides the batch-derived lambda and
    ``bc_scale`` multiplies the cloning term (0 leaves pure DPG)."""
    ptrace = policy_trace or forward(policy, x, resets)
    pi = ptrace.output
    ctrace = forward(critic, ctx.inputs(pi))
    q = ctrace.output[..., 0]
    if lam is None:
        lam = bc_lambda(q, mask, bc_weight, floor)
    n = max(int(mask.sum()), 1)
    dpg = -lam * float(np.sum(np.where(mask, q, 0), dtype=np.float64) / n)
    diff = np.where(mask[..., None], pi - data_actions, 0)
    bc = bc_scale * float(np.sum(diff * diff, dtype=np.float64) / n)
    if not np.isfinite(dpg + bc):
        raise NumericError("non-finite policy loss")
    dq = np.where(mask, -lam / n, 0).astype(critic.dtype)[..., None]
    _, dcin = backward(critic, ctrace, dq, need_input_grad=True, param_grads=False)
    s = ctx.state.shape[-1]
    dpi = dcin[..., s:s + pi.shape[-1]] + (2 * bc_scale / n) * diff
    grads, _ = backward(policy, ptrace, dpi.astype(policy.dtype))
    return dpg + bc, grads, {"dpg_loss": dpg, "bc_loss": bc, "lambda": lam}


def update(bundle: AgentBundle, batch: SequenceBatch, hp: HyperParams,
           rng: np.random.Generator) -> tuple[AgentBundle, dict[str, float]]:
    inp = agent_inputs(batch)
    ctx = critic_context(batch)
    nets, targs, opts = bundle.networks, bundle.targets, bundle.optim

    pi_next = forward(targs["policy"], inp.x, inp.resets).output
    next_q = forward(targs["critic"], ctx.inputs(pi_next)).output[..., 0]
    y, valid = continuous_td_target(inp.rewards, inp.terminals, inp.mask, next_q, hp.gamma)
    data_actions = inp.actions.astype(np.float32)
    closs, cgrads = critic_mse_loss(nets["critic"], ctx.inputs(data_actions), y, valid)
    critic, copt = adam_update(opts["critic"], nets["critic"], cgrads)

    ploss, pgrads, info = policy_loss(nets["policy"], critic, ctx, inp.x, inp.resets, data_actions, inp.mask,
                                      hp.bc_weight, hp.lambda_floor)
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

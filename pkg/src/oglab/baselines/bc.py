"""Behaviour cloning for discrete actions: recurrent policy, masked cross-entropy."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..envs.base import EnvSpec
from ..errors import DataError, NumericError
from ..netcore import NetworkParams, adam_update, backward, forward, init_params, recurrent_topology
from ..vault.sampler import SequenceBatch
from .common import AgentBundle, HyperParams, agent_inputs, bundle_skeleton, make_optim

ALGO_ID = "bc"
ACTION_KIND = "discrete"
ACTOR = "policy"


def init(spec: EnvSpec, hp: HyperParams, rng: np.random.Generator) -> AgentBundle:
    n = spec.num_agents
    topo = recurrent_topology(spec.obs_dim + n, hp.linear_width, hp.gru_width, spec.action_spec.size)
    policy = init_params(topo, rng)
    return AgentBundle(**bundle_skeleton(ALGO_ID, spec), networks={"policy": policy},
                       optim={"policy": make_optim(policy, hp.bc_lr, hp)})


def masked_log_softmax(logits: np.ndarray, legal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Log-probabilities and probabilities with illegal actions removed from the softmax."""
    z = np.where(legal, logits, -np.inf)
    m = z.max(axis=-1, keepdims=True)
    e = np.exp(z - m)
    s = e.sum(axis=-1, keepdims=True)
    return logits - (m + np.log(s)), e / s


def first_bad_step(values: np.ndarray) -> int:
    bad = np.argwhere(~np.isfinite(values))
    return int(bad[0][0]) if len(bad) else -1


def bc_loss(policy: NetworkParams, x, resets, actions, legal, mask) -> tuple[float, NetworkParams]:
    """Masked mean over (step, agent) of -log pi(a_data | history).

    All arrays are time-major with agents folded into the batch axis.
    """
    if legal is None:
        legal = np.ones(actions.shape + (policy.topology[-1].out_dim,), bool)
    a = np.where(mask, actions, 0).astype(np.int64)
    legal_eff = np.where(mask[..., None], legal, True)
    if not np.all(np.take_along_axis(legal_eff, a[..., None], -1)):
        t = int(np.argwhere(~np.take_along_axis(legal_eff, a[..., None], -1)[..., 0])[0][0])
        raise DataError(f"dataset action marked illegal at step {t}")
    trace = forward(policy, x, resets)
    logp, probs = masked_log_softmax(trace.output, legal_eff)
    logp_a = np.take_along_axis(logp, a[..., None], -1)[..., 0]
    n = max(int(mask.sum()), 1)
    nll = np.where(mask, -logp_a, 0)
    if not np.all(np.isfinite(nll)):
        raise NumericError("non-finite behaviour-cloning loss", step=first_bad_step(nll))
    loss = float(np.sum(nll, dtype=np.float64) / n)
    onehot = a[..., None] == np.arange(probs.shape[-1])
    dlogits = np.where(mask[..., None], (probs - onehot) / n, 0).astype(policy.dtype)
    grads, _ = backward(policy, trace, dlogits)
    return loss, grads


def update(bundle: AgentBundle, batch: SequenceBatch, hp: HyperParams,
           rng: np.random.Generator) -> tuple[AgentBundle, dict[str, float]]:
    inp = agent_inputs(batch)
    loss, grads = bc_loss(bundle.networks["policy"], inp.x, inp.resets, inp.actions, inp.legal, inp.mask)
    params, opt = adam_update(bundle.optim["policy"], bundle.networks["policy"], grads)
    new = replace(bundle, networks={"policy": params}, optim={"policy": opt}, updates=bundle.updates + 1)
    return new, {"bc_loss": loss}

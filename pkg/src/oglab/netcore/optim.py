from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, NumericError
from .params import NetworkParams, same_topology


@dataclass
class OptimState:
    first_moment: NetworkParams
    second_moment: NetworkParams
    step_count: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    grad_clip: float | None = None

    @classmethod
    def create(cls, params: NetworkParams, learning_rate: float, **kwargs) -> OptimState:
        if learning_rate <= 0:
            raise ConfigurationError("learning rate must be positive")
        return cls(params.zeros_like(), params.zeros_like(), 0, learning_rate, **kwargs)


def adam_update(state: OptimState, params: NetworkParams,
                grads: NetworkParams) -> tuple[NetworkParams, OptimState]:
    """One bias-corrected Adam step. Inputs are left untouched."""
    if not (same_topology(params, grads) and same_topology(params, state.first_moment)):
        raise ConfigurationError("parameter, gradient and moment topologies differ")
    g = grads.tensors
    for name, v in g.items():
        if not np.all(np.isfinite(v)):
            raise NumericError(f"non-finite gradient in {name}", step=state.step_count + 1)
    if state.grad_clip is not None:
        norm = float(np.sqrt(sum(float(np.sum(np.square(v, dtype=np.float64))) for v in g.values())))
        if norm > state.grad_clip:
            scale = state.grad_clip / norm
            g = {k: v * np.asarray(scale, dtype=v.dtype) for k, v in g.items()}

    t = state.step_count + 1
    b1, b2 = state.beta1, state.beta2
    step_size = state.learning_rate / (1 - b1 ** t)
    inv_bc2 = 1.0 / (1 - b2 ** t)
    new_p, new_m, new_v = {}, {}, {}
    for name, p in params.tensors.items():
        dt = p.dtype.type
        m = dt(b1) * state.first_moment.tensors[name] + dt(1 - b1) * g[name]
        v = dt(b2) * state.second_moment.tensors[name] + dt(1 - b2) * (g[name] * g[name])
        new_p[name] = p - dt(step_size) * m / (np.sqrt(v * dt(inv_bc2)) + dt(state.epsilon))
        new_m[name], new_v[name] = m, v
    topo = params.topology
    return NetworkParams(topo, new_p), OptimState(
        NetworkParams(topo, new_m), NetworkParams(topo, new_v), t,
        state.learning_rate, b1, b2, state.epsilon, state.grad_clip,
    )


def polyak_update(target: NetworkParams, online: NetworkParams, rate: float) -> NetworkParams:
    """target' = rate * online + (1 - rate) * target, elementwise."""
    if not same_topology(target, online):
        raise ConfigurationError("polyak update between different topologies")
    if not 0.0 <= rate <= 1.0:
        raise ConfigurationError(f"polyak rate must lie in [0, 1], got {rate}")
    if rate == 1.0:
        return online.copy()
    if rate == 0.0:
        return target.copy()
    out = {}
    for name, t in target.tensors.items():
        dt = t.dtype.type
        o = online.tensors[name]
        # rounding must not push the blend outside [target, online]
        out[name] = np.clip(t + dt(rate) * (o - t), np.minimum(t, o), np.maximum(t, o))
    return NetworkParams(target.topology, out)

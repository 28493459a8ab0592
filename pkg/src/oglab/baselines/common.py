"""Hyperparameters, agent bundles and batch layout shared by the four baselines.

Every baseline shares one set of weights across agents and tells agents apart by
appending a one-hot agent id to each observation. Sequence tensors are fed to the
networks time-major with agents folded into the batch axis: row ``b * N + i``
holds agent ``i`` of sequence ``b``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

import numpy as np

from ..envs.base import ActionSpec, EnvSpec
from ..errors import ConfigurationError
from ..netcore import NetworkParams, OptimState
from ..vault.sampler import SequenceBatch

CQL_FORMS = ("gap",)


@dataclass
class HyperParams:
    gamma: float = 0.99
    target_update_rate: float = 0.005
    target_period: int = 200
    bc_weight: float = 2.5
    cql_weight: float = 2.0
    cql_num_actions: int = 10
    cql_sigma: float = 0.2
    cql_form: str = "gap"
    critic_lr: float = 1e-3
    policy_lr: float = 3e-4
    q_lr: float = 3e-4
    bc_lr: float = 1e-3
    batch_size: int = 32
    linear_width: int = 64
    gru_width: int = 64
    critic_widths: tuple[int, ...] = (128, 128)
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    grad_clip: float | None = None
    lambda_floor: float = 1e-6

    def __post_init__(self):
        self.critic_widths = tuple(int(w) for w in self.critic_widths)
        self.validate()

    def validate(self) -> None:
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigurationError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.cql_sigma <= 0:
            raise ConfigurationError("cql_sigma must be positive")
        if self.cql_num_actions < 1:
            raise ConfigurationError("cql_num_actions must be >= 1")
        if self.cql_form not in CQL_FORMS:
            raise ConfigurationError(f"cql_form must be one of {CQL_FORMS}")
        for name in ("critic_lr", "policy_lr", "q_lr", "bc_lr", "target_update_rate", "lambda_floor"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.target_period < 1 or self.batch_size < 1:
            raise ConfigurationError("target_period and batch_size must be >= 1")
        if self.bc_weight < 0 or self.cql_weight < 0:
            raise ConfigurationError("bc_weight and cql_weight must be non-negative")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ConfigurationError("grad_clip must be positive when set")

    @classmethod
    def for_algo(cls, algo_id: str, **overrides) -> HyperParams:
        """Defaults from the published tables for ``algo_id`` (CQL weight 2 for the
        discrete learner, 3 for the continuous one), then ``overrides``."""
        base = {"cql_weight": 3.0} if algo_id == "maddpg_cql" else {}
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["critic_widths"] = list(self.critic_widths)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> HyperParams:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown hyperparameters: {sorted(unknown)}")
        return cls(**d)


@dataclass
class AgentBundle:
    algo_id: str
    env_id: str
    num_agents: int
    obs_dim: int
    state_dim: int
    action_spec: ActionSpec
    networks: dict[str, NetworkParams]
    targets: dict[str, NetworkParams] = field(default_factory=dict)
    optim: dict[str, OptimState] = field(default_factory=dict)
    updates: int = 0

    def digest(self) -> str:
        import hashlib

        h = hashlib.sha256()
        for group in (self.networks, self.targets):
            for name in sorted(group):
                h.update(name.encode())
                h.update(group[name].digest().encode())
        return h.hexdigest()


def make_optim(params: NetworkParams, lr: float, hp: HyperParams) -> OptimState:
    return OptimState.create(params, lr, beta1=hp.adam_beta1, beta2=hp.adam_beta2,
                             epsilon=hp.adam_epsilon, grad_clip=hp.grad_clip)


def bundle_skeleton(algo_id: str, spec: EnvSpec) -> dict:
    return dict(algo_id=algo_id, env_id=spec.env_id, num_agents=spec.num_agents, obs_dim=spec.obs_dim,
                state_dim=spec.state_dim, action_spec=spec.action_spec)


def with_agent_ids(obs: np.ndarray) -> np.ndarray:
    """Append a one-hot agent id along the last axis; agents sit on axis -2."""
    n = obs.shape[-2]
    ids = np.broadcast_to(np.eye(n, dtype=obs.dtype), obs.shape[:-1] + (n,))
    return np.concatenate([obs, ids], axis=-1)


def agent_major(x: np.ndarray) -> np.ndarray:
    """(B, L, N, ...) -> (L, B * N, ...)."""
    B, L, N = x.shape[:3]
    return np.swapaxes(x, 0, 1).reshape((L, B * N) + x.shape[3:])


def per_agent(x: np.ndarray, n: int) -> np.ndarray:
    """(B, L, ...) -> (L, B * n, ...), repeating each sequence for every agent."""
    t = np.swapaxes(x, 0, 1)
    return np.repeat(t, n, axis=1)


def time_major(x: np.ndarray) -> np.ndarray:
    return np.swapaxes(x, 0, 1)


def td_valid(mask: np.ndarray, terminals: np.ndarray) -> np.ndarray:
    """Time-major (L, ...) mask of steps whose TD target is defined.

    A step bootstraps from the next step, so the last stored step of an episode
    cut off by the time limit has no target; terminal steps always do.
    """
    nxt = np.zeros_like(mask)
    nxt[:-1] = mask[1:]
    return mask & (terminals | nxt)


def shift_next(x: np.ndarray) -> np.ndarray:
    """Value at t+1 aligned with t along axis 0 (zero after the end)."""
    out = np.zeros_like(x)
    out[:-1] = x[1:]
    return out


@dataclass
class AgentInputs:
    """A SequenceBatch rearranged for shared-parameter networks."""

    x: np.ndarray  # (L, B*N, obs_dim + N)
    resets: np.ndarray  # (L, B*N)
    mask: np.ndarray  # (L, B*N)
    terminals: np.ndarray  # (L, B*N)
    rewards: np.ndarray  # (L, B*N)
    actions: np.ndarray  # (L, B*N) | (L, B*N, d)
    legal: np.ndarray | None  # (L, B*N, A)


def agent_inputs(batch: SequenceBatch) -> AgentInputs:
    n = batch.num_agents
    return AgentInputs(
        x=agent_major(with_agent_ids(batch.observations.astype(np.float32))),
        resets=per_agent(batch.resets, n),
        mask=per_agent(batch.mask, n),
        terminals=per_agent(batch.terminals, n),
        rewards=per_agent(batch.rewards.astype(np.float32), n),
        actions=agent_major(batch.actions),
        legal=None if batch.legal is None else agent_major(batch.legal),
    )


def masked_mean(values: np.ndarray, mask: np.ndarray) -> float:
    count = int(mask.sum())
    if count == 0:
        return 0.0
    return float(np.sum(np.where(mask, values, 0), dtype=np.float64) / count)

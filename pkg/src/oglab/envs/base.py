from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError


@dataclass(frozen=True)
class ActionSpec:
    kind: str  # "discrete" | "continuous"
    size: int  # cardinality for discrete, dimension for continuous
    low: float = -1.0
    high: float = 1.0

    def __post_init__(self):
        if self.kind not in ("discrete", "continuous"):
            raise ConfigurationError(f"unknown action kind {self.kind!r}")
        if self.kind == "continuous" and self.low != -self.high:
            raise ConfigurationError("continuous bounds must be symmetric")

    @property
    def discrete(self) -> bool:
        return self.kind == "discrete"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "size": self.size, "low": self.low, "high": self.high}

    @classmethod
    def from_dict(cls, d: dict) -> ActionSpec:
        return cls(d["kind"], int(d["size"]), float(d.get("low", -1.0)), float(d.get("high", 1.0)))


@dataclass(frozen=True)
class EnvSpec:
    env_id: str
    num_agents: int
    obs_dim: int
    state_dim: int
    action_spec: ActionSpec
    episode_limit: int
    reward_scale: float = 1.0

    def __post_init__(self):
        if self.num_agents < 2:
            raise ConfigurationError("cooperative environments need at least two agents")
        if self.episode_limit < 1:
            raise ConfigurationError("episode_limit must be >= 1")


@dataclass
class TimeStep:
    observations: np.ndarray  # (N, obs_dim) float32
    state: np.ndarray  # (state_dim,) float32
    team_reward: float
    terminal: bool
    truncated: bool
    legal_actions: np.ndarray | None  # (N, num_actions) bool, discrete only

    @property
    def last(self) -> bool:
        return self.terminal or self.truncated

    def same_as(self, other: TimeStep) -> bool:
        legal_eq = (self.legal_actions is None and other.legal_actions is None) or (
            self.legal_actions is not None and other.legal_actions is not None
            and np.array_equal(self.legal_actions, other.legal_actions)
        )
        return (
            self.observations.tobytes() == other.observations.tobytes()
            and self.state.tobytes() == other.state.tobytes()
            and self.team_reward == other.team_reward
            and self.terminal == other.terminal
            and self.truncated == other.truncated
            and legal_eq
        )


def greedy_assignment(agents: np.ndarray, landmarks: np.ndarray, metric: str) -> np.ndarray:
    """Assign each agent a distinct landmark, cheapest pair first.

    Pairs are ranked by (distance, agent index, landmark index), so the result is a
    deterministic function of the positions. Returns the landmark index per agent.
    """
    diff = agents[:, None, :] - landmarks[None, :, :]
    if metric == "manhattan":
        dist = np.abs(diff).sum(-1)
    else:
        dist = np.sqrt((diff * diff).sum(-1))
    n_agents, n_land = dist.shape
    order = np.lexsort((np.tile(np.arange(n_land), n_agents), np.repeat(np.arange(n_agents), n_land), dist.ravel()))
    assigned = np.full(n_agents, -1)
    taken = np.zeros(n_land, bool)
    for flat in order:
        i, k = divmod(int(flat), n_land)
        if assigned[i] < 0 and not taken[k]:
            assigned[i] = k
            taken[k] = True
    return assigned


def landmark_blocks(agents: np.ndarray, landmarks: np.ndarray, dist: np.ndarray, i: int,
                    pos_scale: float, dist_scale: float) -> np.ndarray:
    """Agent ``i``'s egocentric landmark features, nearest landmark first.

    Landmarks are ordered by (distance to agent ``i``, landmark index). Each block
    holds the landmark position relative to the agent followed by the distances
    from agent ``i`` and then from every other agent (in index order) to it.
    ``dist`` is the (agent, landmark) distance matrix.
    """
    n = len(agents)
    rows = [i] + [j for j in range(n) if j != i]
    order = np.lexsort((np.arange(len(landmarks)), dist[i]))
    blocks = [np.concatenate([(landmarks[k] - agents[i]) / pos_scale, dist[rows, k] / dist_scale]) for k in order]
    return np.concatenate(blocks)

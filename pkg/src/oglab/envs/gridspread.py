"""Discrete cooperative navigation on a small grid.

Three agents and three landmarks on a 5x5 grid. Each step the team earns the
number of covered landmarks divided by the number of agents. Episodes never
terminate early; they are truncated after 20 steps.

Observation of agent i (coordinates scaled by 1/(size-1), Manhattan distances
by 1/(2*(size-1))): own cell; then per landmark, nearest first, its offset from
the agent and the distances from agent i and from each other agent to it; then
the offsets of the other agents.
"""

from __future__ import annotations

import numpy as np

from ..errors import ProtocolError
from .base import ActionSpec, EnvSpec, TimeStep, greedy_assignment, landmark_blocks

UP, DOWN, LEFT, RIGHT, STAY = range(5)
ACTION_NAMES = ("up", "down", "left", "right", "stay")
_MOVES = np.array([[0, 1], [0, -1], [-1, 0], [1, 0], [0, 0]])


class GridSpread:
    def __init__(self, size: int = 5, num_agents: int = 3, episode_limit: int = 20):
        self.size = size
        self.num_agents = num_agents
        n = num_agents
        self.spec = EnvSpec(
            env_id=f"gridspread-{n}",
            num_agents=n,
            obs_dim=2 + n * (2 + n) + 2 * (n - 1),
            state_dim=4 * n,
            action_spec=ActionSpec("discrete", len(ACTION_NAMES)),
            episode_limit=episode_limit,
        )
        self.agents = np.zeros((n, 2), dtype=np.int64)
        self.landmarks = np.zeros((n, 2), dtype=np.int64)
        self.t = 0
        self._done = True

    # -- episode control --------------------------------------------------------

    def reset(self, seed: int) -> TimeStep:
        rng = np.random.default_rng(seed)
        cells = self.size * self.size
        lm = rng.choice(cells, size=self.num_agents, replace=False)
        ag = rng.integers(0, cells, size=self.num_agents)
        return self.reset_to(np.stack([ag % self.size, ag // self.size], 1),
                             np.stack([lm % self.size, lm // self.size], 1))

    def reset_to(self, agents, landmarks) -> TimeStep:
        """Start an episode from explicit (x, y) cell coordinates."""
        self.agents = np.array(agents, dtype=np.int64).reshape(self.num_agents, 2)
        self.landmarks = np.array(landmarks, dtype=np.int64).reshape(self.num_agents, 2)
        self.t = 0
        self._done = False
        return self._timestep(0.0, truncated=False)

    def step(self, actions) -> TimeStep:
        if self._done:
            raise ProtocolError("step called on a finished episode; call reset first")
        actions = np.asarray(actions)
        if actions.shape != (self.num_agents,):
            raise ProtocolError(f"expected {self.num_agents} actions, got shape {actions.shape}")
        if not np.issubdtype(actions.dtype, np.integer):
            raise ProtocolError(f"discrete actions must be integers, got dtype {actions.dtype}")
        legal = self.legal_actions()
        for i, a in enumerate(actions):
            if not 0 <= a < len(ACTION_NAMES) or not legal[i, a]:
                raise ProtocolError(f"illegal action {int(a)} for agent {i}")
        moves = _MOVES[actions.astype(np.int64)]
        self.agents = np.clip(self.agents + moves, 0, self.size - 1)
        self.t += 1
        truncated = self.t >= self.spec.episode_limit
        self._done = truncated
        return self._timestep(self.coverage_reward(), truncated)

    # -- views ------------------------------------------------------------------

    def coverage_reward(self) -> float:
        covered = sum(bool(np.any(np.all(self.agents == lm, axis=1))) for lm in self.landmarks)
        return covered / self.num_agents

    def legal_actions(self) -> np.ndarray:
        # moving into a wall is a legal no-op, so every action is always available
        return np.ones((self.num_agents, len(ACTION_NAMES)), dtype=bool)

    def observations(self) -> np.ndarray:
        scale = float(self.size - 1)
        dist = np.abs(self.agents[:, None, :] - self.landmarks[None, :, :]).sum(-1)
        obs = np.empty((self.num_agents, self.spec.obs_dim), dtype=np.float32)
        for i in range(self.num_agents):
            me = self.agents[i]
            others = np.delete(self.agents, i, axis=0)
            obs[i] = np.concatenate([me / scale, landmark_blocks(self.agents, self.landmarks, dist, i, scale, 2 * scale),
                                     (others - me).ravel() / scale])
        return obs

    def state(self) -> np.ndarray:
        return (np.concatenate([self.agents.ravel(), self.landmarks.ravel()]) / float(self.size - 1)).astype(np.float32)

    def _timestep(self, reward: float, truncated: bool) -> TimeStep:
        return TimeStep(self.observations(), self.state(), float(reward), False, truncated, self.legal_actions())

    # -- scripted policies --------------------------------------------------------

    def expert_actions(self) -> np.ndarray:
        """Greedy-assignment planner: walk to the assigned landmark, x-axis first."""
        target = self.landmarks[greedy_assignment(self.agents, self.landmarks, "manhattan")]
        delta = target - self.agents
        acts = np.full(self.num_agents, STAY, dtype=np.int64)
        for i, (dx, dy) in enumerate(delta):
            if dx > 0:
                acts[i] = RIGHT
            elif dx < 0:
                acts[i] = LEFT
            elif dy > 0:
                acts[i] = UP
            elif dy < 0:
                acts[i] = DOWN
        return acts

    def random_actions(self, rng: np.random.Generator) -> np.ndarray:
        legal = self.legal_actions()
        return np.array([rng.choice(np.flatnonzero(row)) for row in legal], dtype=np.int64)

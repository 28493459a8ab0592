"""Continuous cooperative navigation with point masses.

Agents live in the square [-1, 1]^2. The action is a velocity command in
[-1, 1]^2 scaled by ``speed``; the position integrates it and is clipped to the
arena. The team reward is minus the mean, over landmarks, of the distance to the
nearest agent. Episodes are truncated after 25 steps.

Observation of agent i: position, velocity / speed, then per landmark (nearest
first) its offset from the agent and the Euclidean distances from agent i and
from each other agent to it (halved), then the offsets of the other agents.
"""

from __future__ import annotations

import numpy as np

from ..errors import ProtocolError
from .base import ActionSpec, EnvSpec, TimeStep, greedy_assignment, landmark_blocks


class PointSpread:
    def __init__(self, num_agents: int = 3, episode_limit: int = 25, speed: float = 0.15):
        n = num_agents
        self.num_agents = n
        self.speed = speed
        self.spec = EnvSpec(
            env_id=f"pointspread-{n}",
            num_agents=n,
            obs_dim=4 + n * (2 + n) + 2 * (n - 1),
            state_dim=6 * n,
            action_spec=ActionSpec("continuous", 2),
            episode_limit=episode_limit,
        )
        self.pos = np.zeros((n, 2))
        self.vel = np.zeros((n, 2))
        self.landmarks = np.zeros((n, 2))
        self.t = 0
        self._done = True

    def reset(self, seed: int) -> TimeStep:
        rng = np.random.default_rng(seed)
        pts = rng.uniform(-1.0, 1.0, size=(2 * self.num_agents, 2))
        return self.reset_to(pts[: self.num_agents], pts[self.num_agents:])

    def reset_to(self, agents, landmarks) -> TimeStep:
        self.pos = np.array(agents, dtype=np.float64).reshape(self.num_agents, 2)
        self.landmarks = np.array(landmarks, dtype=np.float64).reshape(self.num_agents, 2)
        self.vel = np.zeros_like(self.pos)
        self.t = 0
        self._done = False
        return self._timestep(0.0, False)

    def step(self, actions) -> TimeStep:
        if self._done:
            raise ProtocolError("step called on a finished episode; call reset first")
        actions = np.asarray(actions, dtype=np.float64)
        if actions.shape != (self.num_agents, 2):
            raise ProtocolError(f"expected actions of shape ({self.num_agents}, 2), got {actions.shape}")
        for i, a in enumerate(actions):
            if not np.all(np.isfinite(a)) or np.any(np.abs(a) > 1.0):
                raise ProtocolError(f"action {a.tolist()} for agent {i} outside [-1, 1]^2")
        new_pos = np.clip(self.pos + self.speed * actions, -1.0, 1.0)
        self.vel = new_pos - self.pos
        self.pos = new_pos
        self.t += 1
        truncated = self.t >= self.spec.episode_limit
        self._done = truncated
        return self._timestep(self.distance_reward(), truncated)

    def distance_reward(self) -> float:
        d = np.linalg.norm(self.landmarks[:, None, :] - self.pos[None, :, :], axis=-1)
        return -float(d.min(axis=1).mean())

    def observations(self) -> np.ndarray:
        dist = np.linalg.norm(self.pos[:, None, :] - self.landmarks[None, :, :], axis=-1)
        obs = np.empty((self.num_agents, self.spec.obs_dim), dtype=np.float32)
        for i in range(self.num_agents):
            me = self.pos[i]
            others = np.delete(self.pos, i, axis=0)
            obs[i] = np.concatenate([me, self.vel[i] / self.speed, landmark_blocks(self.pos, self.landmarks, dist, i, 1.0, 2.0),
                                     (others - me).ravel()])
        return obs

    def state(self) -> np.ndarray:
        return np.concatenate([self.pos.ravel(), (self.vel / self.speed).ravel(), self.landmarks.ravel()]).astype(np.float32)

    def _timestep(self, reward: float, truncated: bool) -> TimeStep:
        return TimeStep(self.observations(), self.state(), float(reward), False, truncated, None)

    def expert_actions(self) -> np.ndarray:
        """Greedy-assignment planner with a saturating proportional controller."""
        target = self.landmarks[greedy_assignment(self.pos, self.landmarks, "euclidean")]
        return np.clip((target - self.pos) / self.speed, -1.0, 1.0)

    def random_actions(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(-1.0, 1.0, size=(self.num_agents, 2))

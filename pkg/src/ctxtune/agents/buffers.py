from __future__ import annotations

import numpy as np

from ..errors import InvalidArgument


class ReplayBuffer:
    """Fixed-capacity FIFO transition store with a seeded uniform sampler."""

    def __init__(self, capacity: int, obs_dim: int, action_dim: int, seed: int = 0):
        if capacity < 1:
            raise InvalidArgument("capacity must be >= 1")
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, obs_dim))
        self.dones = np.zeros(capacity)
        self.pos = 0
        self.size = 0
        self.rng = np.random.default_rng(seed)

    def __len__(self) -> int:
        return self.size

    def add(self, obs, action, reward, next_obs, done) -> None:
        i = self.pos
        self.obs[i] = obs
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_obs[i] = next_obs
        self.dones[i] = done
        self.pos = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int) -> dict[str, np.ndarray]:
        if batch_size < 1:
            raise InvalidArgument("batch size must be >= 1")
        if self.size < batch_size:
            raise InvalidArgument(f"buffer holds {self.size} transitions, need {batch_size}")
        idx = self.rng.integers(0, self.size, size=batch_size)
        return {
            "obs": self.obs[idx],
            "actions": self.actions[idx],
            "rewards": self.rewards[idx],
            "next_obs": self.next_obs[idx],
            "dones": self.dones[idx],
        }


class RolloutBuffer:
    """One on-policy segment of fixed length, cleared after each update."""

    def __init__(self, n_steps: int, obs_dim: int):
        if n_steps < 1:
            raise InvalidArgument("rollout length must be >= 1")
        self.n_steps = n_steps
        self.obs = np.zeros((n_steps, obs_dim))
        self.actions = np.zeros(n_steps, dtype=np.int64)
        self.log_probs = np.zeros(n_steps)
        self.values = np.zeros(n_steps)
        self.rewards = np.zeros(n_steps)
        self.dones = np.zeros(n_steps)
        self.advantages = np.zeros(n_steps)
        self.returns = np.zeros(n_steps)
        self.pos = 0

    def __len__(self) -> int:
        return self.pos

    @property
    def full(self) -> bool:
        return self.pos == self.n_steps

    def add(self, obs, action, log_prob, value, reward, done) -> None:
        if self.full:
            raise InvalidArgument("rollout buffer is full")
        i = self.pos
        self.obs[i] = obs
        self.actions[i] = action
        self.log_probs[i] = log_prob
        self.values[i] = value
        self.rewards[i] = reward
        self.dones[i] = done
        self.pos += 1

    def clear(self) -> None:
        self.pos = 0

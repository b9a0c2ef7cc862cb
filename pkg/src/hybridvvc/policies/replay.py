from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Experience:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool = False


class ReplayBuffer:
    """Fixed-capacity FIFO ring buffer of transitions."""

    def __init__(self, obs_dim, act_dim, capacity):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.capacity = int(capacity)
        self.obs = np.zeros((self.capacity, obs_dim))
        self.next_obs = np.zeros((self.capacity, obs_dim))
        self.act = np.zeros((self.capacity, act_dim))
        self.rew = np.zeros(self.capacity)
        self.done = np.zeros(self.capacity)
        self.ptr = 0
        self.size = 0
        self.total = 0

    def __len__(self):
        return self.size

    def add(self, exp: Experience):
        if np.shape(exp.action) != (self.act_dim,):
            raise ValueError(f"action must have length {self.act_dim}")
        if np.shape(exp.state) != (self.obs_dim,) or np.shape(exp.next_state) != (self.obs_dim,):
            raise ValueError(f"states must have length {self.obs_dim}")
        self.obs[self.ptr] = exp.state
        self.next_obs[self.ptr] = exp.next_state
        self.act[self.ptr] = exp.action
        self.rew[self.ptr] = exp.reward
        self.done[self.ptr] = float(exp.done)
        self.ptr = (self.ptr + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        self.total += 1

    def sample(self, batch_size, rng: np.random.Generator):
        idx = rng.integers(0, self.size, size=batch_size)
        return self.obs[idx], self.act[idx], self.rew[idx], self.next_obs[idx], self.done[idx]

    def items(self):
        """Stored transitions, oldest first."""
        order = [(self.ptr - self.size + k) % self.capacity for k in range(self.size)]
        return [
            Experience(self.obs[i].copy(), self.act[i].copy(), float(self.rew[i]),
                       self.next_obs[i].copy(), bool(self.done[i]))
            for i in order
        ]

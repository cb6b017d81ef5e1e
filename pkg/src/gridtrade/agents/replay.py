"""Uniform-sampling replay buffer with episode-aware sequence slices."""

from __future__ import annotations

import numpy as np


class ReplayBuffer:
    """Ring buffer of transitions; sequence draws never cross episodes."""

    def __init__(self, capacity: int, state_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.dones = np.zeros(capacity)
        self.episodes = np.full(capacity, -1, dtype=np.int64)
        self._next = 0
        self.size = 0

    def push(self, state, action, reward, next_state, done, episode: int) -> None:
        i = self._next
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.dones[i] = 1.0 if done else 0.0
        self.episodes[i] = episode
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch: int, rng: np.random.Generator):
        if self.size < batch:
            raise ValueError(f"buffer holds {self.size} < batch {batch}")
        idx = rng.integers(0, self.size, size=batch)
        return (self.states[idx], self.actions[idx], self.rewards[idx],
                self.next_states[idx], self.dones[idx])

    def _window_ok(self, start: int, length: int) -> bool:
        end = start + length
        if end > self.size:
            return False
        # when full, the seam between newest and oldest data sits before _next
        if self.size == self.capacity and start < self._next < end:
            return False
        ep = self.episodes[start]
        return bool(np.all(self.episodes[start:end] == ep))

    def sample_sequences(self, n_sequences: int, length: int, rng: np.random.Generator):
        """Batched (B, L, ...) arrays of contiguous same-episode windows."""
        if self.size < length:
            raise ValueError(f"buffer holds {self.size} < sequence length {length}")
        starts = []
        attempts = 0
        while len(starts) < n_sequences:
            attempts += 1
            if attempts > 200 * n_sequences:
                raise ValueError("could not find enough same-episode sequences")
            s = int(rng.integers(0, self.size - length + 1))
            if self._window_ok(s, length):
                starts.append(s)
        idx = np.array([[s + t for t in range(length)] for s in starts])
        return (self.states[idx], self.actions[idx], self.rewards[idx],
                self.next_states[idx], self.dones[idx])

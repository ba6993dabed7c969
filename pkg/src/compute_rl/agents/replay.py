from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ..execution import OptionTransition


class Batch(NamedTuple):
    state: np.ndarray
    option: np.ndarray
    reward_sum: np.ndarray
    task_reward: np.ndarray
    tau_effective: np.ndarray
    next_state: np.ndarray
    terminal: np.ndarray

    def __len__(self) -> int:
        return len(self.state)

    def transitions(self) -> list[OptionTransition]:
        return [
            OptionTransition(int(s), int(o), float(r), int(t), int(s2), bool(d), float(tr))
            for s, o, r, tr, t, s2, d in zip(*self)
        ]


class ReplayBuffer:
    """Fixed-capacity ring buffer of option transitions with seeded uniform sampling."""

    def __init__(self, capacity: int, seed: int = 0) -> None:
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.rng = np.random.default_rng(seed)
        self._state = np.zeros(capacity, dtype=np.int64)
        self._option = np.zeros(capacity, dtype=np.int64)
        self._reward = np.zeros(capacity, dtype=np.float64)
        self._task = np.zeros(capacity, dtype=np.float64)
        self._tau = np.ones(capacity, dtype=np.int64)
        self._next = np.zeros(capacity, dtype=np.int64)
        self._terminal = np.zeros(capacity, dtype=bool)
        self._pos = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def add(self, tr: OptionTransition) -> None:
        i = self._pos
        self._state[i] = tr.state
        self._option[i] = tr.option
        self._reward[i] = tr.reward_sum
        self._task[i] = tr.task_reward
        self._tau[i] = tr.tau_effective
        self._next[i] = tr.next_state
        self._terminal[i] = tr.terminal
        self._pos = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int) -> Batch:
        """Uniform sample with replacement; never larger than the current fill."""
        if self._size == 0:
            raise ValueError("cannot sample from an empty replay buffer")
        n = min(batch_size, self._size)
        idx = self.rng.integers(0, self._size, size=n)
        return Batch(
            self._state[idx],
            self._option[idx],
            self._reward[idx],
            self._task[idx],
            self._tau[idx],
            self._next[idx],
            self._terminal[idx],
        )

    def state_dict(self) -> dict:
        n = self._size
        return {
            "capacity": self.capacity,
            "pos": self._pos,
            "size": n,
            "rng": self.rng.bit_generator.state,
            "state": self._state[:n].tolist(),
            "option": self._option[:n].tolist(),
            "reward": self._reward[:n].tolist(),
            "task": self._task[:n].tolist(),
            "tau": self._tau[:n].tolist(),
            "next": self._next[:n].tolist(),
            "terminal": self._terminal[:n].tolist(),
        }

    def load_state_dict(self, d: dict) -> None:
        n = d["size"]
        self.__init__(d["capacity"])
        self.rng.bit_generator.state = d["rng"]
        self._pos, self._size = d["pos"], n
        self._state[:n] = d["state"]
        self._option[:n] = d["option"]
        self._reward[:n] = d["reward"]
        self._task[:n] = d["task"]
        self._tau[:n] = d["tau"]
        self._next[:n] = d["next"]
        self._terminal[:n] = d["terminal"]

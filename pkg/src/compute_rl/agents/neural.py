from __future__ import annotations

import random
from typing import Sequence

import numpy as np

from ..core import ControlOption
from ..execution import OptionTransition
from . import network as nn
from .replay import Batch, ReplayBuffer
from .tabular import _rng_from, _rng_state
from .td import AgentConfig, greedy_index, select_option, tie_priority


class NetworkQ:
    """Option values from an MLP over scaled observation vectors."""

    def __init__(self, params: nn.Params, obs_table: np.ndarray) -> None:
        self.params = params
        self.obs_table = obs_table
        self.n_options = params[-1][0].shape[1]

    def values(self, state: int) -> list[float]:
        q, _ = nn.forward(self.params, self.obs_table[state : state + 1])
        return q[0].tolist()

    def value(self, state: int, option: int) -> float:
        return self.values(state)[option]

    def batch_values(self, states: np.ndarray) -> np.ndarray:
        return nn.forward(self.params, self.obs_table[states])[0]


def observation_table(env) -> np.ndarray:
    """Every state's observation vector scaled into [0, 1]."""
    high = np.maximum(np.asarray(env.obs_high, dtype=np.float64), 1.0)
    return np.array([env.observation(s) for s in range(env.n_states)], dtype=np.float64) / high


class NeuralAgent:
    """Replay-trained Q-network with a periodically synced target network.

    Each decision stores its transition; once ``learning_starts`` transitions
    are buffered, every decision earns ``updates_per_decision`` gradient
    steps (Adam, global-norm clipping) on sampled batches. The target
    network is copied from the online one every ``target_sync_period``
    decisions.
    """

    kind = "neural"

    def __init__(
        self,
        obs_table: np.ndarray,
        options: Sequence[ControlOption],
        config: AgentConfig = AgentConfig(learning_rate=1e-3, replay=True),
        seed: int = 0,
        learns_cost: bool = True,
    ) -> None:
        self.options = tuple(options)
        self.config = config
        self.learns_cost = learns_cost
        self.seed = seed
        self.obs_table = np.asarray(obs_table, dtype=np.float64)
        self.rng = random.Random(seed)
        self.np_rng = np.random.default_rng(seed)
        sizes = (self.obs_table.shape[1], *config.hidden, len(self.options))
        self.q = NetworkQ(nn.init_mlp(sizes, self.np_rng), self.obs_table)
        self.q_target = NetworkQ(nn.copy_params(self.q.params), self.obs_table)
        self.optimizer = nn.Adam(self.q.params, lr=config.learning_rate)
        self.buffer = ReplayBuffer(config.buffer_capacity, seed + 1)
        self.decisions = 0
        self.updates = 0
        self.epsilon = config.epsilon
        self.priority = tie_priority(self.options, config.tie_break)
        self._credit = 0.0
        self.last_grad_norm = 0.0

    @property
    def n_options(self) -> int:
        return len(self.options)

    def act(self, state: int, greedy: bool = False) -> int:
        eps = 0.0 if greedy else self.epsilon(self.decisions)
        return select_option(state, self.q, eps, self.rng, self.priority)

    def greedy(self, state: int) -> int:
        return greedy_index(self.q.values(state), self.priority)

    def targets(self, batch: Batch) -> np.ndarray:
        gamma = self.config.gamma
        reward = batch.reward_sum if self.learns_cost else batch.task_reward
        disc = np.where(batch.terminal, 0.0, gamma ** batch.tau_effective.astype(np.float64))
        best_next = self.q_target.batch_values(batch.next_state).max(axis=1)
        return reward + disc * best_next

    def train_step(self, batch: Batch | Sequence[OptionTransition]) -> float:
        """One clipped Adam step on mean squared TD error; return mean |delta|."""
        if not isinstance(batch, Batch):
            batch = _to_batch(batch)
        if len(batch) == 0:
            raise ValueError("train_step needs a non-empty batch")
        targets = self.targets(batch)
        obs = self.obs_table[batch.state]
        _, grads, delta = nn.td_loss_and_grad(self.q.params, obs, batch.option, targets)
        grads, self.last_grad_norm = nn.clip_by_global_norm(grads, self.config.grad_clip)
        self.q.params = self.optimizer.step(self.q.params, grads)
        self.updates += 1
        return float(np.mean(np.abs(delta)))

    def sync_target(self) -> None:
        self.q_target.params = nn.copy_params(self.q.params)

    def observe(self, tr: OptionTransition) -> float | None:
        self.decisions += 1
        self.buffer.add(tr)
        err = None
        if len(self.buffer) >= max(self.config.learning_starts, 1):
            self._credit += self.config.updates_per_decision
            while self._credit >= 1.0:
                self._credit -= 1.0
                err = self.train_step(self.buffer.sample(self.config.batch_size))
        if self.decisions % self.config.target_sync_period == 0:
            self.sync_target()
        return err

    def state_dict(self) -> dict:
        return {
            "kind": self.kind,
            "config": self.config.to_dict(),
            "options": [[o.action, o.duration] for o in self.options],
            "learns_cost": self.learns_cost,
            "seed": self.seed,
            "decisions": self.decisions,
            "updates": self.updates,
            "credit": self._credit,
            "rng": _rng_state(self.rng),
            "np_rng": self.np_rng.bit_generator.state,
            "obs_table": self.obs_table.tolist(),
            "params": nn.params_to_lists(self.q.params),
            "target_params": nn.params_to_lists(self.q_target.params),
            "optimizer": self.optimizer.state_dict(),
            "buffer": self.buffer.state_dict(),
        }

    @classmethod
    def from_state_dict(cls, d: dict) -> "NeuralAgent":
        cfg = AgentConfig(**d["config"])
        options = [ControlOption(a, t) for a, t in d["options"]]
        agent = cls(np.array(d["obs_table"], dtype=np.float64), options, cfg, d["seed"], d["learns_cost"])
        agent.decisions = d["decisions"]
        agent.updates = d["updates"]
        agent._credit = d["credit"]
        agent.rng.setstate(_rng_from(d["rng"]))
        agent.np_rng.bit_generator.state = d["np_rng"]
        agent.q.params = nn.params_from_lists(d["params"])
        agent.q_target.params = nn.params_from_lists(d["target_params"])
        agent.optimizer.load_state_dict(d["optimizer"])
        agent.buffer.load_state_dict(d["buffer"])
        return agent


def _to_batch(transitions: Sequence[OptionTransition]) -> Batch:
    cols = list(zip(*transitions)) if transitions else [()] * 7
    s, o, r, tau, s2, term, task = cols
    return Batch(
        np.asarray(s, dtype=np.int64),
        np.asarray(o, dtype=np.int64),
        np.asarray(r, dtype=np.float64),
        np.asarray(task, dtype=np.float64),
        np.asarray(tau, dtype=np.int64),
        np.asarray(s2, dtype=np.int64),
        np.asarray(term, dtype=bool),
    )

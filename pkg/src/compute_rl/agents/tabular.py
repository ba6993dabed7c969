from __future__ import annotations

import random
from typing import Sequence

from ..core import ControlOption
from ..execution import OptionTransition
from .replay import ReplayBuffer
from .td import AgentConfig, TabularQ, greedy_index, select_option, tie_priority


class TabularAgent:
    """Q-learning over options with an exact state-id x option table.

    By default each decision's transition is learned from immediately
    (online). With ``config.replay`` set, transitions go into a replay buffer
    and every decision trains on a sampled batch instead.

    ``learns_cost=False`` trains on the cost-free task reward; that is how the
    fixed-rate baseline is built.
    """

    kind = "tabular"

    def __init__(
        self,
        n_states: int,
        options: Sequence[ControlOption],
        config: AgentConfig = AgentConfig(),
        seed: int = 0,
        learns_cost: bool = True,
    ) -> None:
        self.options = tuple(options)
        self.config = config
        self.learns_cost = learns_cost
        self.q = TabularQ(n_states, len(self.options), config.q_init)
        self.rng = random.Random(seed)
        self.seed = seed
        self.decisions = 0
        self.epsilon = config.epsilon
        self.priority = tie_priority(self.options, config.tie_break)
        self._alpha = config.learning_rate
        self._gpow = [config.gamma**k for k in range(max(o.duration for o in self.options) + 1)]
        self.buffer = ReplayBuffer(config.buffer_capacity, seed + 1) if config.replay else None
        self._credit = 0.0

    @property
    def n_options(self) -> int:
        return len(self.options)

    def act(self, state: int, greedy: bool = False) -> int:
        eps = 0.0 if greedy else self.epsilon(self.decisions)
        return select_option(state, self.q, eps, self.rng, self.priority)

    def greedy(self, state: int) -> int:
        return greedy_index(self.q.table[state], self.priority)

    def _update(self, tr: OptionTransition) -> float:
        table = self.q.table
        r = tr.reward_sum if self.learns_cost else tr.task_reward
        if tr.terminal:
            target = r
        else:
            target = r + self._gpow[tr.tau_effective] * max(table[tr.next_state])
        row = table[tr.state]
        delta = target - row[tr.option]
        row[tr.option] += self._alpha * delta
        return delta

    def train_step(self, batch: Sequence[OptionTransition]) -> float:
        """Apply ``Q(s, o) += alpha * delta`` sample by sample; return mean |delta|."""
        if not batch:
            raise ValueError("train_step needs a non-empty batch")
        total = 0.0
        for tr in batch:
            total += abs(self._update(tr))
        return total / len(batch)

    def observe(self, tr: OptionTransition) -> float | None:
        """Count one decision and learn from it."""
        self.decisions += 1
        if self.buffer is None:
            return abs(self._update(tr))
        self.buffer.add(tr)
        if len(self.buffer) < max(self.config.learning_starts, 1):
            return None
        self._credit += self.config.updates_per_decision
        err = None
        while self._credit >= 1.0:
            self._credit -= 1.0
            err = self.train_step(self.buffer.sample(self.config.batch_size).transitions())
        return err

    # checkpointing
    def state_dict(self) -> dict:
        return {
            "kind": self.kind,
            "config": self.config.to_dict(),
            "options": [[o.action, o.duration] for o in self.options],
            "learns_cost": self.learns_cost,
            "seed": self.seed,
            "decisions": self.decisions,
            "credit": self._credit,
            "rng": _rng_state(self.rng),
            "q": self.q.table,
            "buffer": None if self.buffer is None else self.buffer.state_dict(),
        }

    @classmethod
    def from_state_dict(cls, d: dict) -> "TabularAgent":
        cfg = AgentConfig(**d["config"])
        options = [ControlOption(a, t) for a, t in d["options"]]
        agent = cls(len(d["q"]), options, cfg, d["seed"], d["learns_cost"])
        agent.q.table = [[float(v) for v in row] for row in d["q"]]
        agent.decisions = d["decisions"]
        agent._credit = d["credit"]
        agent.rng.setstate(_rng_from(d["rng"]))
        if d["buffer"] is not None:
            agent.buffer.load_state_dict(d["buffer"])
        return agent


def _rng_state(rng: random.Random) -> list:
    version, internal, gauss = rng.getstate()
    return [version, list(internal), gauss]


def _rng_from(state: list) -> tuple:
    version, internal, gauss = state
    return (version, tuple(internal), gauss)

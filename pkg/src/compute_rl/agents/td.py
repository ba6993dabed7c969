"""Option-value plumbing shared by every learner: TD targets and selection."""

from __future__ import annotations

import random
from dataclasses import asdict, dataclass
from typing import Protocol, Sequence

from ..core import DEFAULT_GAMMA, ControlOption, UsageError, bootstrap_discount
from ..execution import OptionTransition


class QFunction(Protocol):
    n_options: int

    def values(self, state: int) -> Sequence[float]: ...

    def value(self, state: int, option: int) -> float: ...


class TabularQ:
    """Exact table of option values, one row per state id."""

    def __init__(self, n_states: int, n_options: int, fill: float = 0.0) -> None:
        self.n_states = n_states
        self.n_options = n_options
        self.table = [[fill] * n_options for _ in range(n_states)]

    def values(self, state: int) -> list[float]:
        return self.table[state]

    def value(self, state: int, option: int) -> float:
        return self.table[state][option]

    def copy(self) -> "TabularQ":
        out = TabularQ(0, self.n_options)
        out.n_states = self.n_states
        out.table = [row[:] for row in self.table]
        return out

    def max_abs_diff(self, other: "TabularQ") -> float:
        return max(abs(a - b) for ra, rb in zip(self.table, other.table) for a, b in zip(ra, rb))


def td_target(transition: OptionTransition, q_target: QFunction, gamma: float) -> float:
    """Option return plus the ``gamma**tau``-discounted best successor value."""
    disc = bootstrap_discount(gamma, transition.tau_effective, transition.terminal)
    if disc == 0.0:
        return transition.reward_sum
    return transition.reward_sum + disc * max(q_target.values(transition.next_state))


def td_error(transition: OptionTransition, q_current: QFunction, q_target: QFunction, gamma: float) -> float:
    return td_target(transition, q_target, gamma) - q_current.value(transition.state, transition.option)


def tie_priority(options: Sequence[ControlOption], tie_break: str = "shortest") -> tuple[int, ...] | None:
    """Index order in which tied maxima are resolved.

    ``"shortest"`` is plain index order (lowest index wins); ``"longest"``
    prefers the longest duration, then the lowest action.
    Returns None for plain index order.
    """
    if tie_break == "shortest":
        return None
    if tie_break == "longest":
        return tuple(sorted(range(len(options)), key=lambda i: (-options[i].duration, options[i].action)))
    raise UsageError(f"tie_break must be 'shortest' or 'longest', got {tie_break!r}")


def greedy_index(row: Sequence[float], priority: Sequence[int] | None = None) -> int:
    if not isinstance(row, list):
        row = list(row)
    m = max(row)
    if priority is None:
        return row.index(m)
    for i in priority:
        if row[i] == m:
            return i
    raise AssertionError("max not found")


def select_option(
    state: int,
    q: QFunction,
    epsilon: float,
    rng: random.Random,
    priority: Sequence[int] | None = None,
) -> int:
    """Epsilon-greedy option index.

    Exactly one uniform draw decides exploration; exploring draws a second
    uniform index over all options.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise UsageError(f"epsilon must lie in [0, 1], got {epsilon}")
    if rng.random() < epsilon:
        return rng.randrange(q.n_options)
    return greedy_index(q.values(state), priority)


@dataclass(frozen=True)
class EpsilonSchedule:
    start: float = 1.0
    end: float = 0.01
    decay_decisions: int = 20_000

    def __post_init__(self) -> None:
        for v in (self.start, self.end):
            if not 0.0 <= v <= 1.0:
                raise UsageError(f"epsilon values must lie in [0, 1], got {v}")
        if self.decay_decisions < 1:
            raise UsageError("decay_decisions must be >= 1")

    def __call__(self, decisions: int) -> float:
        if decisions >= self.decay_decisions:
            return self.end
        return self.start + (self.end - self.start) * (decisions / self.decay_decisions)


@dataclass(frozen=True)
class AgentConfig:
    """Learner hyperparameters; decision counts drive every schedule."""

    gamma: float = DEFAULT_GAMMA
    learning_rate: float = 0.1
    epsilon_start: float = 1.0
    epsilon_end: float = 0.01
    epsilon_decay: int = 20_000
    buffer_capacity: int = 100_000
    batch_size: int = 32
    target_sync_period: int = 1_000
    updates_per_decision: float = 1.0
    replay: bool = False
    learning_starts: int = 1_000
    tie_break: str = "shortest"
    hidden: tuple[int, ...] = (64, 64)
    grad_clip: float = 1.0
    q_init: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise UsageError(f"gamma must lie in [0, 1], got {self.gamma}")
        for name in ("learning_rate", "buffer_capacity", "batch_size", "target_sync_period", "updates_per_decision"):
            if getattr(self, name) <= 0:
                raise UsageError(f"{name} must be positive, got {getattr(self, name)}")
        if self.learning_starts < 0:
            raise UsageError("learning_starts must be >= 0")
        EpsilonSchedule(self.epsilon_start, self.epsilon_end, self.epsilon_decay)
        tie_priority((), self.tie_break)
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    @property
    def epsilon(self) -> EpsilonSchedule:
        return EpsilonSchedule(self.epsilon_start, self.epsilon_end, self.epsilon_decay)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

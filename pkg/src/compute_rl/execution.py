"""Run options against an environment: the semi-MDP interaction loop."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Callable, Iterable, Iterator, NamedTuple, Sequence

from .core import ComputeCostModel, ControlOption, ExactSum, UsageError, discounted_sum


class OptionTransition(NamedTuple):
    """One replay record.

    ``option`` is the index into the option set. ``reward_sum`` is the
    discounted task reward over the option with the decision cost already
    subtracted; ``task_reward`` is the same sum without the cost.
    """

    state: int
    option: int
    reward_sum: float
    tau_effective: int
    next_state: int
    terminal: bool
    task_reward: float = 0.0


class TickRecord(NamedTuple):
    tick: int
    decision: bool
    action: int
    reward: float
    cost: float
    phase: str = ""


ExecutionTrace = list  # list[TickRecord]


def execute_option(
    env,
    option: ControlOption,
    gamma: float,
    cost_model: ComputeCostModel,
    *,
    index: int = -1,
    max_ticks: int | None = None,
) -> tuple[OptionTransition, list[TickRecord]]:
    """Repeat ``option.action`` for up to ``option.duration`` ticks.

    Execution stops early when the episode terminates or ``max_ticks`` runs
    out (time-limit truncation, stored as non-terminal). The full cost is
    charged once, on the first tick, however short the option turns out.
    """
    if env.terminal:
        raise UsageError("execute_option called on a terminal environment")
    n = option.duration
    if max_ticks is not None:
        if max_ticks < 1:
            raise UsageError(f"max_ticks must be >= 1, got {max_ticks}")
        n = min(n, max_ticks)
    c = cost_model.c
    state = env.state
    action = option.action
    rewards: list[float] = []
    trace: list[TickRecord] = []
    out = None
    for k in range(n):
        tick = env.tick
        out = env.step(action)
        rewards.append(out.reward)
        trace.append(TickRecord(tick, k == 0, env.last_action, out.reward, c if k == 0 else 0.0, env.phase))
        if out.terminal:
            break
    task = discounted_sum(rewards, gamma)
    tr = OptionTransition(state, index, task - c, len(rewards), out.next_state, out.terminal, task)
    return tr, trace


@dataclass
class EpisodeRecord:
    transitions: list[OptionTransition] = field(default_factory=list)
    trace: list[TickRecord] = field(default_factory=list)
    task_return: float = 0.0
    total_cost: float = 0.0
    decisions: int = 0
    ticks: int = 0
    terminal: bool = False

    @property
    def net_return(self) -> float:
        return self.task_return - self.total_cost


def run_episode(
    env,
    policy: Callable[[int], int],
    options: Sequence[ControlOption],
    gamma: float,
    cost_model: ComputeCostModel,
    tick_cap: int,
    *,
    seed: int = 0,
    on_transition: Callable[[OptionTransition, list[TickRecord]], None] | None = None,
    keep_trace: bool = True,
    keep_transitions: bool = True,
) -> EpisodeRecord:
    """Reset ``env`` and run ``policy`` (state -> option index) to the end.

    ``on_transition(transition, trace)`` is called after every option.

    The episode ends on termination or once ``tick_cap`` ticks have elapsed.
    Task return is undiscounted; total cost is summed exactly from the
    per-tick emitted costs.
    """
    if tick_cap < 1:
        raise UsageError(f"tick_cap must be >= 1, got {tick_cap}")
    state = env.reset(seed)
    rec = EpisodeRecord()
    task = ExactSum()
    cost = ExactSum()
    ticks = 0
    decisions = 0
    while True:
        idx = policy(state)
        tr, trace = execute_option(env, options[idx], gamma, cost_model, index=idx, max_ticks=tick_cap - ticks)
        decisions += 1
        ticks += tr.tau_effective
        for t in trace:
            task.add(t.reward)
            cost.add(t.cost)
        if keep_trace:
            rec.trace.extend(trace)
        if keep_transitions:
            rec.transitions.append(tr)
        if on_transition is not None:
            on_transition(tr, trace)
        state = tr.next_state
        if tr.terminal or ticks >= tick_cap:
            rec.terminal = tr.terminal
            break
    rec.task_return = task.value
    rec.total_cost = cost.value
    rec.decisions = decisions
    rec.ticks = ticks
    return rec


TRACE_FIELDS = ("tick", "decision", "action", "reward", "cost", "phase")


def trace_to_jsonl(trace: Iterable[TickRecord], fh: IO[str], **tags: object) -> None:
    """One JSON object per tick; ``tags`` (seed, episode, ...) prefix every row."""
    for t in trace:
        row = dict(tags)
        row.update(tick=t.tick, decision=t.decision, action=t.action, reward=t.reward, cost=t.cost)
        if t.phase:
            row["phase"] = t.phase
        fh.write(json.dumps(row) + "\n")


def read_trace_jsonl(fh: IO[str]) -> Iterator[tuple[dict, list[TickRecord]]]:
    """Yield ``(tags, trace)`` for each run of consecutive rows sharing the same tags."""
    current: list[TickRecord] = []
    tags: dict | None = None
    for line in fh:
        line = line.strip()
        if not line:
            continue
        row = json.loads(line)
        row_tags = {k: v for k, v in row.items() if k not in TRACE_FIELDS}
        if current and row_tags != tags:
            yield tags, current
            current = []
        tags = row_tags
        current.append(
            TickRecord(row["tick"], bool(row["decision"]), row["action"], row["reward"], row["cost"], row.get("phase", ""))
        )
    if current:
        yield tags, current

"""Value-based learners over the option set."""

from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from ..core import DEFAULT_DURATIONS, ControlOption, option_set
from .neural import NeuralAgent, NetworkQ, observation_table
from .oracle import option_outcomes, smdp_value_iteration
from .replay import Batch, ReplayBuffer
from .tabular import TabularAgent
from .td import (
    AgentConfig,
    EpsilonSchedule,
    QFunction,
    TabularQ,
    greedy_index,
    select_option,
    td_error,
    td_target,
    tie_priority,
)

CHECKPOINT_FORMAT = "compute-rl-checkpoint"
CHECKPOINT_VERSION = 1

Agent = TabularAgent | NeuralAgent


def make_agent(
    kind: str,
    env,
    config: AgentConfig,
    durations: Sequence[int] = DEFAULT_DURATIONS,
    seed: int = 0,
    learns_cost: bool = True,
) -> Agent:
    options = option_set(env.n_actions, durations)
    if kind == "tabular":
        return TabularAgent(env.n_states, options, config, seed, learns_cost)
    if kind == "neural":
        cfg = config if config.replay else replace(config, replay=True)
        return NeuralAgent(observation_table(env), options, cfg, seed, learns_cost)
    raise ValueError(f"unknown agent kind {kind!r}; choose 'tabular' or 'neural'")


def fixed_rate_baseline(kind: str, env, config: AgentConfig, seed: int = 0) -> Agent:
    """Same learner restricted to duration 1 and trained on task reward only."""
    return make_agent(kind, env, config, durations=(1,), seed=seed, learns_cost=False)


def save_checkpoint(agent: Agent, path: str | Path) -> None:
    blob = {"format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION, **agent.state_dict()}
    Path(path).write_text(json.dumps(blob))


def load_checkpoint(path: str | Path) -> Agent:
    blob = json.loads(Path(path).read_text())
    if blob.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a compute-rl checkpoint")
    if blob.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {blob.get('version')}")
    kind = blob["kind"]
    if kind == "tabular":
        return TabularAgent.from_state_dict(blob)
    if kind == "neural":
        return NeuralAgent.from_state_dict(blob)
    raise ValueError(f"{path}: unknown agent kind {kind!r}")


__all__ = [
    "Agent",
    "AgentConfig",
    "Batch",
    "ControlOption",
    "EpsilonSchedule",
    "NetworkQ",
    "NeuralAgent",
    "QFunction",
    "ReplayBuffer",
    "TabularAgent",
    "TabularQ",
    "fixed_rate_baseline",
    "greedy_index",
    "load_checkpoint",
    "make_agent",
    "observation_table",
    "option_outcomes",
    "save_checkpoint",
    "select_option",
    "smdp_value_iteration",
    "td_error",
    "td_target",
    "tie_priority",
]

"""Deterministic, seedable toy environments with a tick-level step interface.

Every environment exposes the same small surface:

* ``reset(seed) -> state`` and ``step(action) -> StepOutcome``
* ``state``: canonical integer state id of the current observation
* ``observation(state)``: the integer observation vector for a state id
* ``n_states``, ``n_actions``, ``obs_size``, ``obs_high``
* ``last_action`` (the base action actually executed on the last tick),
  ``phase`` (a coarse label used by trace analyses), ``tick``, ``terminal``

Rewards returned by ``step`` are task rewards only; compute cost is
applied by the option executor.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any, NamedTuple

from .core import UsageError


class StepOutcome(NamedTuple):
    next_state: int
    reward: float
    terminal: bool


@dataclass(frozen=True)
class StickyConfig:
    repeat_probability: float = 0.25

    def __post_init__(self) -> None:
        if not 0.0 <= self.repeat_probability <= 1.0:
            raise UsageError(f"repeat_probability must lie in [0, 1], got {self.repeat_probability}")


@dataclass(frozen=True)
class EnvDescriptor:
    name: str
    n_actions: int
    action_names: tuple[str, ...]
    obs_size: int
    obs_fields: tuple[str, ...]
    n_states: int
    episodic: str
    params: dict[str, Any] = field(default_factory=dict)


def _clamp(x: int, lo: int, hi: int) -> int:
    return lo if x < lo else hi if x > hi else x


class ToyEnv:
    name = "toy"
    action_names: tuple[str, ...] = ()
    obs_fields: tuple[str, ...] = ()

    n_states: int
    state: int
    tick: int
    terminal: bool
    last_action: int
    phase: str

    @property
    def n_actions(self) -> int:
        return len(self.action_names)

    @property
    def obs_size(self) -> int:
        return len(self.obs_fields)

    @property
    def obs_high(self) -> tuple[int, ...]:
        """Per-field upper bound of the observation, for input scaling."""
        raise NotImplementedError

    def params(self) -> dict[str, Any]:
        raise NotImplementedError

    def describe(self) -> EnvDescriptor:
        return EnvDescriptor(
            name=self.name,
            n_actions=self.n_actions,
            action_names=self.action_names,
            obs_size=self.obs_size,
            obs_fields=self.obs_fields,
            n_states=self.n_states,
            episodic=self.episodic,
            params=self.params(),
        )

    episodic = ""

    def _check_live(self) -> None:
        if self.terminal:
            raise UsageError(f"{self.name}: step() called on a terminal episode; call reset() first")


class ChainMDP(ToyEnv):
    """Deterministic chain of ``length`` states; +1 on entering the right end."""

    name = "chain"
    action_names = ("left", "right")
    obs_fields = ("position",)
    episodic = "terminates on reaching the rightmost state"

    def __init__(self, length: int = 6) -> None:
        if length < 2:
            raise UsageError(f"chain length must be >= 2, got {length}")
        self.length = length
        self.n_states = length
        self.state = 0
        self.tick = 0
        self.terminal = False
        self.last_action = -1
        self.phase = "chain"

    @property
    def obs_high(self) -> tuple[int, ...]:
        return (self.length - 1,)

    def params(self) -> dict[str, Any]:
        return {"length": self.length}

    def reset(self, seed: int = 0) -> int:
        self.state = 0
        self.tick = 0
        self.terminal = False
        self.last_action = -1
        return 0

    def step(self, action: int) -> StepOutcome:
        if self.terminal:
            self._check_live()
        nxt, reward, terminal = self.transitions(self.state, action)[0][1:]
        self.state = nxt
        self.tick += 1
        self.terminal = terminal
        self.last_action = action
        return StepOutcome(nxt, reward, terminal)

    def observation(self, state: int) -> tuple[int, ...]:
        return (state,)

    # exact model, used by value iteration
    def states(self) -> range:
        return range(self.length)

    def is_terminal_state(self, state: int) -> bool:
        return state == self.length - 1

    def transitions(self, state: int, action: int) -> list[tuple[float, int, float, bool]]:
        """``[(probability, next_state, reward, terminal)]`` for one tick."""
        if action not in (0, 1):
            raise UsageError(f"chain action must be 0 or 1, got {action}")
        nxt = state + 1 if action == 1 else max(state - 1, 0)
        terminal = nxt == self.length - 1
        return [(1.0, nxt, 1.0 if terminal else 0.0, terminal)]


class LineTrack(ToyEnv):
    """A paddle on a ``width``-column line intercepting balls.

    Each serve picks a landing column uniformly at random; the ball arrives
    ``height`` ticks later. The paddle moves at most one column per tick.
    Interception pays +1, a miss -1, and the episode terminates after
    ``max_misses`` misses. The miss counter is hidden, like a life counter.

    With ``relative=True`` (the default) the observation is (landing column
    minus paddle, ticks to arrival): 17 x 24 ids at the default size instead
    of 9 x 9 x 24, which tabular learners fit far faster under sticky
    actions. It drops the absolute paddle column, which only matters when
    the paddle is pushed into a wall. ``relative=False`` observes
    (paddle, landing, ticks to arrival) exactly.
    """

    name = "linetrack"
    action_names = ("left", "stay", "right")
    obs_fields = ("paddle", "landing", "ticks_to_arrival")
    episodic = "terminates after max_misses misses"

    def __init__(self, width: int = 9, height: int = 24, max_misses: int = 3, relative: bool = True) -> None:
        if width < 2 or height < 1 or max_misses < 1:
            raise UsageError(f"bad LineTrack geometry width={width} height={height} max_misses={max_misses}")
        self.width = width
        self.height = height
        self.max_misses = max_misses
        self.relative = bool(relative)
        if self.relative:
            self.obs_fields = ("offset", "ticks_to_arrival")
            self.n_states = (2 * width - 1) * height
        else:
            self.n_states = width * width * height
        self._rng = random.Random(0)
        self.reset(0)

    @property
    def obs_high(self) -> tuple[int, ...]:
        if self.relative:
            return (self.width - 1, self.height)
        return (self.width - 1, self.width - 1, self.height)

    def params(self) -> dict[str, Any]:
        return {"width": self.width, "height": self.height, "max_misses": self.max_misses, "relative": self.relative}

    def _encode(self) -> int:
        if self.relative:
            offset = self.landing - self.paddle + self.width - 1
            return offset * self.height + self.ticks_to_arrival - 1
        return (self.paddle * self.width + self.landing) * self.height + self.ticks_to_arrival - 1

    def _serve(self) -> None:
        self.landing = self._rng.randrange(self.width)
        self.ticks_to_arrival = self.height
        self.serves += 1

    def reset(self, seed: int = 0) -> int:
        self._rng.seed(seed)
        self.paddle = self.width // 2
        self.misses = 0
        self.serves = 0
        self.tick = 0
        self.terminal = False
        self.last_action = -1
        self.phase = "descent"
        self._serve()
        self.state = self._encode()
        return self.state

    def step(self, action: int) -> StepOutcome:
        if self.terminal:
            self._check_live()
        p = self.paddle + action - 1
        self.paddle = 0 if p < 0 else self.width - 1 if p >= self.width else p
        self.tick += 1
        self.last_action = action
        self.ticks_to_arrival -= 1
        reward = 0.0
        if self.ticks_to_arrival == 0:
            if self.paddle == self.landing:
                reward = 1.0
            else:
                reward = -1.0
                self.misses += 1
                self.terminal = self.misses >= self.max_misses
            self._serve()
        self.phase = "arrival" if self.ticks_to_arrival <= 4 else "descent"
        self.state = self._encode()
        return StepOutcome(self.state, reward, self.terminal)

    def observation(self, state: int) -> tuple[int, ...]:
        rest, tta = divmod(state, self.height)
        if self.relative:
            return (rest - self.width + 1, tta + 1)
        paddle, landing = divmod(rest, self.width)
        return (paddle, landing, tta + 1)


class WaveCollect(ToyEnv):
    """Collect objects that arrive in waves of escalating speed.

    The agent moves among ``lanes`` lanes. Within a wave, objects arrive one
    after another, each in a random lane, travelling ``track_length`` cells
    at ``ticks_per_cell`` ticks per cell; catching one in the agent's lane
    pays +1. Wave ``w`` uses ``base_ticks_per_cell - w`` ticks per cell. An
    idle gap of ``gap`` ticks precedes every wave; gap ticks pay nothing.
    The episode ends when the last wave is done.

    With ``drift_probability > 0`` an object may slide one lane sideways each
    time it advances a cell, which rewards watching it on approach.

    State ids are shared across waves so a tabular learner pools experience:
    in a wave the id encodes (object lane minus agent lane, ticks to
    arrival), in a gap it encodes (agent lane, gap ticks remaining). The
    wave index and the count of objects left are hidden; the current speed
    shows through the ticks-to-arrival of each fresh object.
    Observation: (object offset, ticks to arrival, lane, gap remaining),
    with the fields of the inactive phase set to 0.
    """

    name = "wavecollect"
    action_names = ("up", "stay", "down")
    obs_fields = ("object_offset", "ticks_to_arrival", "lane", "gap_remaining")
    episodic = "terminates after the final wave; speed escalates every wave"

    def __init__(
        self,
        lanes: int = 5,
        track_length: int = 2,
        wave_size: int = 10,
        gap: int = 20,
        base_ticks_per_cell: int = 4,
        n_waves: int | None = None,
        drift_probability: float = 0.0,
    ) -> None:
        n_waves = base_ticks_per_cell if n_waves is None else n_waves
        if lanes < 2 or track_length < 1 or wave_size < 1 or gap < 1:
            raise UsageError("bad WaveCollect geometry")
        if not 1 <= n_waves <= base_ticks_per_cell:
            raise UsageError(f"n_waves must lie in [1, base_ticks_per_cell={base_ticks_per_cell}], got {n_waves}")
        if not 0.0 <= drift_probability <= 1.0:
            raise UsageError(f"drift_probability must lie in [0, 1], got {drift_probability}")
        self.lanes = lanes
        self.track_length = track_length
        self.wave_size = wave_size
        self.gap = gap
        self.base_ticks_per_cell = base_ticks_per_cell
        self.n_waves = n_waves
        self.drift_probability = drift_probability

        # id layout: gap block, then in-wave block, then the "done" id
        self._max_travel = self.travel_ticks(0)
        self._wave_offset = lanes * gap
        self.done_state = self._wave_offset + (2 * lanes - 1) * self._max_travel
        self.n_states = self.done_state + 1
        self._rng = random.Random(0)
        self.reset(0)

    def ticks_per_cell(self, wave: int) -> int:
        return self.base_ticks_per_cell - wave

    def travel_ticks(self, wave: int) -> int:
        return self.track_length * self.ticks_per_cell(wave)

    @property
    def obs_high(self) -> tuple[int, ...]:
        return (self.lanes - 1, self._max_travel, self.lanes - 1, self.gap)

    def params(self) -> dict[str, Any]:
        return {
            "lanes": self.lanes,
            "track_length": self.track_length,
            "wave_size": self.wave_size,
            "gap": self.gap,
            "base_ticks_per_cell": self.base_ticks_per_cell,
            "n_waves": self.n_waves,
            "drift_probability": self.drift_probability,
        }

    def _encode(self) -> int:
        if self.terminal:
            return self.done_state
        if self.gap_remaining > 0:
            return self.lane * self.gap + self.gap_remaining - 1
        offset = self.object_lane - self.lane + self.lanes - 1
        return self._wave_offset + offset * self._max_travel + self.ticks_to_arrival - 1

    def _spawn(self) -> None:
        self.object_lane = self._rng.randrange(self.lanes)
        self.ticks_to_arrival = self._travel
        self.spawned += 1

    def reset(self, seed: int = 0) -> int:
        self._rng.seed(seed)
        self.lane = self.lanes // 2
        self.wave = 0
        self.gap_remaining = self.gap
        self.object_lane = 0
        self.ticks_to_arrival = 0
        self.collected_in_wave = 0
        self.arrived_in_wave = 0
        self.spawned = 0
        self._travel = self.travel_ticks(0)
        self._tpc = self.ticks_per_cell(0)
        self.tick = 0
        self.terminal = False
        self.last_action = -1
        self.phase = "gap"
        self.state = self._encode()
        return self.state

    def step(self, action: int) -> StepOutcome:
        if self.terminal:
            self._check_live()
        ln = self.lane + action - 1
        self.lane = 0 if ln < 0 else self.lanes - 1 if ln >= self.lanes else ln
        self.tick += 1
        self.last_action = action
        reward = 0.0
        if self.gap_remaining > 0:
            self.gap_remaining -= 1
            if self.gap_remaining == 0:
                self._spawn()
                self.phase = "wave"
        else:
            self.ticks_to_arrival -= 1
            if self.ticks_to_arrival == 0:
                if self.lane == self.object_lane:
                    reward = 1.0
                    self.collected_in_wave += 1
                self.arrived_in_wave += 1
                if self.arrived_in_wave == self.wave_size:
                    self.arrived_in_wave = 0
                    self.collected_in_wave = 0
                    if self.wave == self.n_waves - 1:
                        self.terminal = True
                        self.phase = "done"
                    else:
                        self.wave += 1
                        self._travel = self.travel_ticks(self.wave)
                        self._tpc = self.ticks_per_cell(self.wave)
                        self.gap_remaining = self.gap
                        self.object_lane = 0
                        self.ticks_to_arrival = 0
                        self.phase = "gap"
                else:
                    self._spawn()
            elif self.drift_probability > 0.0 and self.ticks_to_arrival % self._tpc == 0:
                if self._rng.random() < self.drift_probability:
                    shift = 1 if self._rng.random() < 0.5 else -1
                    self.object_lane = _clamp(self.object_lane + shift, 0, self.lanes - 1)
        self.state = self._encode()
        return StepOutcome(self.state, reward, self.terminal)

    def observation(self, state: int) -> tuple[int, ...]:
        if not 0 <= state < self.n_states:
            raise UsageError(f"state id {state} out of range")
        if state == self.done_state:
            return (0, 0, 0, 0)
        if state < self._wave_offset:
            lane, g = divmod(state, self.gap)
            return (0, 0, lane, g + 1)
        offset, tta = divmod(state - self._wave_offset, self._max_travel)
        return (offset - self.lanes + 1, tta + 1, 0, 0)

    def in_gap(self, state: int) -> bool:
        return self.observation(state)[3] > 0


class StickyActions:
    """Per-tick sticky actions.

    On every tick after the first of an episode, with probability
    ``repeat_probability`` the previously executed action is applied instead
    of the requested one. The repeat draws come from a private stream seeded
    from the reset seed, so the wrapped env stays deterministic.
    """

    def __init__(self, env: ToyEnv, config: StickyConfig) -> None:
        self.env = env
        self.config = config
        self.repeat_probability = config.repeat_probability
        self._rng = random.Random(0)
        self._prev = -1
        self.repeats = 0
        self.last_repeated = False

    def __getattr__(self, name: str) -> Any:
        return getattr(self.env, name)

    @property
    def state(self) -> int:
        return self.env.state

    @property
    def terminal(self) -> bool:
        return self.env.terminal

    @property
    def last_action(self) -> int:
        return self.env.last_action

    def reset(self, seed: int = 0) -> int:
        self._rng.seed(f"sticky-{seed}")
        self._prev = -1
        self.repeats = 0
        self.last_repeated = False
        return self.env.reset(seed)

    def step(self, action: int) -> StepOutcome:
        if self._prev >= 0 and self._rng.random() < self.repeat_probability:
            action = self._prev
            self.repeats += 1
            self.last_repeated = True
        else:
            self.last_repeated = False
        self._prev = action
        return self.env.step(action)

    def describe(self) -> EnvDescriptor:
        d = self.env.describe()
        params = dict(d.params, sticky=self.repeat_probability)
        return EnvDescriptor(d.name, d.n_actions, d.action_names, d.obs_size, d.obs_fields, d.n_states, d.episodic, params)


def sticky_wrap(env: ToyEnv, config: StickyConfig) -> StickyActions:
    return StickyActions(env, config)


ENVIRONMENTS: dict[str, type[ToyEnv]] = {
    LineTrack.name: LineTrack,
    ChainMDP.name: ChainMDP,
    WaveCollect.name: WaveCollect,
}


def make_env(name: str, params: dict[str, Any] | None = None, sticky: float = 0.0) -> ToyEnv | StickyActions:
    try:
        cls = ENVIRONMENTS[name]
    except KeyError:
        raise UsageError(f"unknown environment {name!r}; choose from {sorted(ENVIRONMENTS)}") from None
    env = cls(**(params or {}))
    if sticky > 0.0:
        return sticky_wrap(env, StickyConfig(sticky))
    return env


def env_catalog() -> list[EnvDescriptor]:
    return [cls().describe() for cls in (LineTrack, ChainMDP, WaveCollect)]

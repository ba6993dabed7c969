"""Shared value types and numeric primitives.

One tick is one decision opportunity. Options pair a base action with a
repeat duration; choosing an option is a decision and is charged a flat
compute cost, while the ticks spent executing it are free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

DEFAULT_DURATIONS: tuple[int, ...] = (1, 2, 4, 8)
DEFAULT_TICK_RATE = 12.0
DEFAULT_GAMMA = 0.99


class UsageError(ValueError):
    """Raised when an operation is called outside its contract."""


@dataclass(frozen=True)
class ControlOption:
    """A base action held open-loop for ``duration`` ticks."""

    action: int
    duration: int

    def __post_init__(self) -> None:
        if self.duration < 1:
            raise UsageError(f"duration must be >= 1, got {self.duration}")


def validate_durations(durations: Iterable[int]) -> tuple[int, ...]:
    out = tuple(sorted(int(d) for d in durations))
    if not out:
        raise UsageError("duration set is empty")
    if out[0] < 1:
        raise UsageError(f"durations must be positive, got {out}")
    if len(set(out)) != len(out):
        raise UsageError(f"durations must be unique, got {out}")
    return out


def option_set(n_actions: int, durations: Iterable[int] = DEFAULT_DURATIONS) -> tuple[ControlOption, ...]:
    """Cartesian product of actions and durations.

    Ordering is actions-major with durations ascending, so option index
    ``a * len(durations) + k`` is action ``a`` held for the ``k``-th
    shortest duration. Argmax tie-breaking relies on this order.
    """
    if n_actions < 1:
        raise UsageError(f"need at least one action, got {n_actions}")
    durs = validate_durations(durations)
    return tuple(ControlOption(a, d) for a in range(n_actions) for d in durs)


@dataclass(frozen=True)
class ComputeCostModel:
    """Flat per-decision cost ``c`` in reward units."""

    c: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.c) or self.c < 0:
            raise UsageError(f"cost must be finite and >= 0, got {self.c}")


def discounted_sum(rewards: Sequence[float], gamma: float) -> float:
    """Return ``sum_i gamma**(i-1) * rewards[i]`` (1-based i)."""
    n = len(rewards)
    if n == 0:
        raise UsageError("discounted_sum of an empty reward sequence")
    if not 0.0 <= gamma <= 1.0:
        raise UsageError(f"gamma must lie in [0, 1], got {gamma}")
    if gamma == 0.0:
        return float(rewards[0])
    if gamma == 1.0:
        return math.fsum(rewards)
    acc = 0.0
    for r in reversed(rewards):
        acc = r + gamma * acc
    return acc


def cost_at_tick(is_decision_tick: bool, model: ComputeCostModel) -> float:
    return model.c if is_decision_tick else 0.0


def bootstrap_discount(gamma: float, tau_effective: int, terminal: bool) -> float:
    """Weight on the successor value after an option of ``tau_effective`` ticks."""
    if tau_effective < 1:
        raise UsageError(f"tau_effective must be >= 1, got {tau_effective}")
    if terminal:
        return 0.0
    return gamma**tau_effective


class ExactSum:
    """Running float sum without rounding drift (Shewchuk partials).

    ``value`` is the correctly rounded total of everything added, so
    adding ``c`` exactly ``n`` times gives the same float as ``c * n``.
    """

    __slots__ = ("_partials",)

    def __init__(self) -> None:
        self._partials: list[float] = []

    def add(self, x: float) -> None:
        partials = self._partials
        i = 0
        for y in partials:
            if abs(x) < abs(y):
                x, y = y, x
            hi = x + y
            lo = y - (hi - x)
            if lo:
                partials[i] = lo
                i += 1
            x = hi
        partials[i:] = [x]

    def merge(self, other: "ExactSum") -> None:
        for p in other._partials:
            self.add(p)

    @property
    def value(self) -> float:
        return math.fsum(self._partials)

"""Decision accounting and the rate/performance metrics derived from it."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import DEFAULT_TICK_RATE, ExactSum, UsageError
from .execution import TickRecord

DEFAULT_EMA_BETA = 0.8
DEFAULT_WINDOW_TICKS = 24
SCORE_WINDOW = 100


@dataclass
class DecisionLedger:
    """Decisions ``d_T`` against elapsed ticks ``T`` for one run."""

    tick_rate: float = DEFAULT_TICK_RATE
    decisions: int = 0
    ticks: int = 0
    _cost: ExactSum = field(default_factory=ExactSum, repr=False)

    def record_tick(self, is_decision: bool, cost: float) -> None:
        self.ticks += 1
        if is_decision:
            self.decisions += 1
        self._cost.add(cost)

    def record_trace(self, trace: Iterable[TickRecord]) -> None:
        for t in trace:
            self.record_tick(t.decision, t.cost)

    @property
    def total_cost(self) -> float:
        return self._cost.value

    @property
    def hz(self) -> float:
        return decisions_per_second(self)

    def merge(self, other: "DecisionLedger") -> "DecisionLedger":
        if other.tick_rate != self.tick_rate:
            raise UsageError("cannot merge ledgers with different tick rates")
        out = DecisionLedger(self.tick_rate, self.decisions + other.decisions, self.ticks + other.ticks)
        out._cost.merge(self._cost)
        out._cost.merge(other._cost)
        return out


def decisions_per_second(ledger: DecisionLedger) -> float:
    if ledger.ticks <= 0:
        raise UsageError("decision rate is undefined for a ledger with no ticks")
    return ledger.tick_rate * ledger.decisions / ledger.ticks


def hz(decisions: int, ticks: int, tick_rate: float = DEFAULT_TICK_RATE) -> float:
    return decisions_per_second(DecisionLedger(tick_rate, decisions, ticks))


def ema_rate_trace(
    indicators: Sequence[bool] | Sequence[float] | Iterable[TickRecord],
    beta: float = DEFAULT_EMA_BETA,
    tick_rate: float = DEFAULT_TICK_RATE,
) -> np.ndarray:
    """Exponentially decayed decision rate in Hz, one value per tick.

    ``y[0] = x[0] * rate`` and ``y[t] = beta * y[t-1] + (1 - beta) * x[t] * rate``.
    Accepts raw 0/1 indicators or a trace of tick records.
    """
    if not 0.0 < beta < 1.0:
        raise UsageError(f"beta must lie in (0, 1), got {beta}")
    xs = [float(t.decision) if isinstance(t, TickRecord) else float(t) for t in indicators]
    out = np.empty(len(xs))
    if not xs:
        return out
    y = xs[0] * tick_rate
    out[0] = y
    a = 1.0 - beta
    for i in range(1, len(xs)):
        y = beta * y + a * xs[i] * tick_rate
        out[i] = y
    return out


def window_rates(trace: Sequence[TickRecord], window_ticks: int, tick_rate: float = DEFAULT_TICK_RATE) -> list[float]:
    """Hz over each complete ``window_ticks``-tick window; the ragged tail is dropped."""
    if window_ticks < 1:
        raise UsageError(f"window_ticks must be >= 1, got {window_ticks}")
    flags = [1 if t.decision else 0 for t in trace]
    return [
        tick_rate * sum(flags[i : i + window_ticks]) / window_ticks
        for i in range(0, len(flags) - window_ticks + 1, window_ticks)
    ]


def rate_histogram(
    traces: Iterable[Sequence[TickRecord]],
    window_ticks: int = DEFAULT_WINDOW_TICKS,
    bin_edges: Sequence[float] | None = None,
    tick_rate: float = DEFAULT_TICK_RATE,
) -> tuple[np.ndarray, np.ndarray]:
    """Histogram of per-window decision rates pooled over trajectories.

    Default bins are 0.75 Hz wide over [0, tick_rate]; the top edge is
    inclusive so a window at exactly ``tick_rate`` is counted.
    """
    if window_ticks < 1:
        raise UsageError(f"window_ticks must be >= 1, got {window_ticks}")
    edges = np.asarray(bin_edges if bin_edges is not None else np.linspace(0.0, tick_rate, 17), dtype=np.float64)
    rates = [r for tr in traces for r in window_rates(tr, window_ticks, tick_rate)]
    counts, edges = np.histogram(np.asarray(rates, dtype=np.float64), bins=edges)
    return counts, edges


def normalized_score(agent_score: float, random_score: float, baseline_score: float) -> float:
    """``(agent - random) / (baseline - random)``: 0 at random play, 1 at the baseline."""
    denom = baseline_score - random_score
    if denom == 0 or not math.isfinite(denom):
        raise UsageError(f"degenerate normalisation: baseline {baseline_score} vs random {random_score}")
    return (agent_score - random_score) / denom


@dataclass(frozen=True)
class EpisodeStats:
    task_return: float
    net_return: float
    decisions: int
    ticks: int


@dataclass(frozen=True)
class ScoreSummary:
    task_return: float
    net_return: float
    hz: float
    episodes: int


def summarize(episodes: Sequence[EpisodeStats], window: int = SCORE_WINDOW, tick_rate: float = DEFAULT_TICK_RATE) -> ScoreSummary:
    """Mean returns and pooled decision rate over the last ``window`` episodes."""
    tail = list(episodes[-window:])
    if not tail:
        return ScoreSummary(math.nan, math.nan, math.nan, 0)
    ticks = sum(e.ticks for e in tail)
    return ScoreSummary(
        task_return=math.fsum(e.task_return for e in tail) / len(tail),
        net_return=math.fsum(e.net_return for e in tail) / len(tail),
        hz=tick_rate * sum(e.decisions for e in tail) / ticks if ticks else math.nan,
        episodes=len(tail),
    )


def pool_summaries(summaries: Sequence[ScoreSummary]) -> ScoreSummary:
    """Equal-weight mean across seeds."""
    if not summaries:
        raise UsageError("no summaries to pool")
    n = len(summaries)
    return ScoreSummary(
        task_return=math.fsum(s.task_return for s in summaries) / n,
        net_return=math.fsum(s.net_return for s in summaries) / n,
        hz=math.fsum(s.hz for s in summaries) / n,
        episodes=sum(s.episodes for s in summaries),
    )

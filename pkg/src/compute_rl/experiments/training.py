"""Decision-budgeted training, cost calibration and cost sweeps."""

from __future__ import annotations

import logging
import math
import random
import subprocess
import time
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence, TypeVar

from .. import __version__
from ..agents import Agent, fixed_rate_baseline, make_agent
from ..core import ComputeCostModel, ControlOption, ExactSum, UsageError
from ..envs import make_env
from ..execution import OptionTransition, TickRecord, run_episode
from ..metrics import DecisionLedger, EpisodeStats, ScoreSummary, normalized_score, pool_summaries, summarize
from .config import ExperimentConfig, derive_seed

log = logging.getLogger(__name__)

CURVE_COLUMNS = (
    "env",
    "agent",
    "seed",
    "cost",
    "decisions",
    "ticks",
    "hz",
    "hz_100",
    "task_return_100",
    "net_return_100",
    "normalized_score",
)
SWEEP_COLUMNS = (
    "env",
    "multiplier",
    "cost",
    "seed",
    "decisions",
    "ticks",
    "hz",
    "hz_100",
    "task_return_100",
    "net_return_100",
    "normalized_score",
)


@dataclass
class RunResult:
    config: ExperimentConfig
    seed: int
    role: str  # "compute" or "baseline"
    cost: float
    ledger: DecisionLedger
    tau_sum: int
    curve: list[dict[str, Any]]
    episodes: list[EpisodeStats]
    traces: list[tuple[int, list[TickRecord]]]
    eval_traces: list[list[TickRecord]] = field(default_factory=list)
    eval_returns: list[float] = field(default_factory=list)
    tail_decisions: int = 0
    tail_ticks: int = 0
    task_total: float = 0.0  # undiscounted task return over the budgeted ticks
    agent: Agent | None = None
    wall_seconds: float = 0.0  # not written to any artifact

    @property
    def summary(self) -> ScoreSummary:
        return summarize(self.episodes, tick_rate=self.config.tick_rate)

    def cost_audit_ok(self) -> bool:
        return self.ledger.total_cost == self.cost * self.ledger.decisions and self.tau_sum == self.ledger.ticks

    def segment_hz(self, start_frac: float, end_frac: float) -> float:
        """Decision rate over the slice of training between two budget fractions."""
        grid = {row["decisions"]: row["ticks"] for row in self.curve}
        grid[0] = 0
        d0 = round(start_frac * self.config.budget)
        d1 = round(end_frac * self.config.budget)
        if d0 not in grid or d1 not in grid:
            raise ValueError(f"budget fractions {start_frac}, {end_frac} are not on the checkpoint grid")
        return self.config.tick_rate * (d1 - d0) / (grid[d1] - grid[d0])


def _git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        return out.stdout.strip() if out.returncode == 0 else "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def version_stamp() -> str:
    return f"compute-rl {__version__} ({_git_describe()})"


def run_training(
    config: ExperimentConfig,
    seed: int,
    cost: float,
    *,
    baseline: bool = False,
    references: tuple[float, float] | None = None,
    keep_agent: bool = False,
) -> RunResult:
    """Train one agent for exactly ``config.budget`` decisions.

    ``baseline`` selects the fixed-rate learner (duration 1, trained on task
    reward; the cost is still charged in the ledger). If the budget runs out
    mid-episode the episode is played to its end with the same policy but no
    learning, and those trailing decisions are kept out of the ledger.
    ``references`` is ``(random_score, baseline_score)`` for the normalised
    score column.
    """
    started = time.perf_counter()
    env = make_env(config.env, config.env_params, config.sticky)
    acfg = config.agent_config
    agent_seed = derive_seed(seed, "agent", config.env)
    if baseline:
        agent = fixed_rate_baseline(config.agent, env, acfg, agent_seed)
    else:
        agent = make_agent(config.agent, env, acfg, config.durations, agent_seed)
    options = agent.options
    cost_model = ComputeCostModel(cost)
    gamma = acfg.gamma
    budget = config.budget
    interval = config.checkpoint_interval
    ledger = DecisionLedger(config.tick_rate)
    episode_rng = random.Random(derive_seed(seed, "env", config.env))

    episodes: list[EpisodeStats] = []
    traces: deque[tuple[int, list[TickRecord]]] = deque(maxlen=max(config.trace_episodes, 0) or None)
    curve: list[dict[str, Any]] = []
    counters = {"tau": 0, "tail_d": 0, "tail_t": 0}
    task_total = ExactSum()

    def checkpoint_row(decisions: int, ticks: int, s: ScoreSummary) -> dict[str, Any]:
        norm: float | str = ""
        if references is not None and s.episodes:
            norm = normalized_score(s.task_return, *references)
        return {
            "env": config.env,
            "agent": "baseline" if baseline else "compute",
            "seed": seed,
            "cost": cost,
            "decisions": decisions,
            "ticks": ticks,
            "hz": config.tick_rate * decisions / ticks,
            "hz_100": s.hz if s.episodes else "",
            "task_return_100": s.task_return if s.episodes else "",
            "net_return_100": s.net_return if s.episodes else "",
            "normalized_score": norm,
        }

    pending: list[tuple[int, int]] = []

    def on_transition(tr: OptionTransition, trace: list[TickRecord]) -> None:
        if agent.decisions >= budget:
            counters["tail_d"] += 1
            counters["tail_t"] += tr.tau_effective
            return
        agent.observe(tr)
        ledger.record_trace(trace)
        counters["tau"] += tr.tau_effective
        for t in trace:
            task_total.add(t.reward)
        if agent.decisions % interval == 0 or agent.decisions == budget:
            pending.append((ledger.decisions, ledger.ticks))

    keep_trace = config.trace_episodes > 0
    n_episode = 0
    while agent.decisions < budget:
        rec = run_episode(
            env,
            agent.act,
            options,
            gamma,
            cost_model,
            config.tick_cap,
            seed=episode_rng.getrandbits(32),
            on_transition=on_transition,
            keep_trace=keep_trace,
            keep_transitions=False,
        )
        episodes.append(EpisodeStats(rec.task_return, rec.net_return, rec.decisions, rec.ticks))
        if keep_trace:
            traces.append((n_episode, rec.trace))
        n_episode += 1
        # checkpoints hit inside an episode are summarised once it completes
        if pending:
            s = summarize(episodes, tick_rate=config.tick_rate)
            curve.extend(checkpoint_row(d, t, s) for d, t in pending)
            pending.clear()

    result = RunResult(
        config=config,
        seed=seed,
        role="baseline" if baseline else "compute",
        cost=cost,
        ledger=ledger,
        tau_sum=counters["tau"],
        curve=curve,
        episodes=episodes,
        traces=list(traces),
        tail_decisions=counters["tail_d"],
        tail_ticks=counters["tail_t"],
        task_total=task_total.value,
        agent=agent if keep_agent else None,
    )
    if config.eval_episodes > 0:
        for k in range(config.eval_episodes):
            rec = run_episode(
                env,
                lambda s: agent.act(s, greedy=True),
                options,
                gamma,
                cost_model,
                config.tick_cap,
                seed=derive_seed(seed, "eval", config.env, k),
                keep_transitions=False,
            )
            result.eval_traces.append(rec.trace)
            result.eval_returns.append(rec.task_return)
    result.wall_seconds = time.perf_counter() - started
    return result


T = TypeVar("T")
R = TypeVar("R")


def parallel_map(fn: Callable[[T], R], jobs: Iterable[T], workers: int = 1) -> list[R]:
    """Ordered map over a bounded process pool; runs inline when ``workers`` is 1."""
    jobs = list(jobs)
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, jobs))


def _train_job(job: tuple) -> RunResult:
    config, seed, cost, baseline, references = job
    return run_training(config, seed, cost, baseline=baseline, references=references)


@dataclass
class Calibration:
    """Per-decision cost derived from fixed-rate baseline runs."""

    cost: float
    raw: float  # pooled G_T / T before clamping
    task_return: float
    ticks: int
    baselines: list[RunResult]

    @property
    def baseline_score(self) -> float:
        return pool_summaries([r.summary for r in self.baselines]).task_return


def calibrate_cost(config: ExperimentConfig, seeds: Sequence[int] | None = None) -> Calibration:
    """``c = G_T / T`` from baselines trained for the same decision budget.

    ``G_T`` is the accumulated undiscounted task return over all training
    ticks, pooled over seeds. A non-positive result is clamped to
    ``config.cost_min`` with a warning. The baselines run at zero cost
    since the cost never enters their learning; their ledgers therefore
    carry no cost.
    """
    seeds = tuple(config.seeds if seeds is None else seeds)
    if not seeds:
        raise UsageError("seed list is empty")
    runs = parallel_map(_train_job, [(config, s, 0.0, True, None) for s in seeds], config.workers)
    g = ExactSum()
    for r in runs:
        g.add(r.task_total)
    ticks = sum(r.ledger.ticks for r in runs)
    raw = g.value / ticks
    cost = raw
    if raw <= config.cost_min:
        if raw <= 0:
            log.warning("baseline accumulated return %.6g <= 0 on %s; cost clamped to %g", g.value, config.env, config.cost_min)
        cost = config.cost_min
    return Calibration(cost, raw, g.value, ticks, runs)


def random_policy_score(config: ExperimentConfig, episodes: int | None = None) -> float:
    """Mean undiscounted task return of uniformly random primitive actions at every tick."""
    n = config.random_episodes if episodes is None else episodes
    if n < 1:
        raise UsageError("random_episodes must be >= 1")
    env = make_env(config.env, config.env_params, config.sticky)
    options = tuple(ControlOption(a, 1) for a in range(env.n_actions))
    rng = random.Random(derive_seed(0, "random-policy", config.env))
    total = ExactSum()
    for k in range(n):
        rec = run_episode(
            env,
            lambda s: rng.randrange(len(options)),
            options,
            config.agent_config.gamma,
            ComputeCostModel(0.0),
            config.tick_cap,
            seed=derive_seed(k, "random-episode", config.env),
            keep_trace=False,
            keep_transitions=False,
        )
        total.add(rec.task_return)
    return total.value / n


@dataclass
class SweepResult:
    """One compute-agent run per (multiplier, seed), plus calibration context."""

    config: ExperimentConfig
    base_cost: float
    runs: dict[tuple[float, int], RunResult]
    calibration: Calibration | None = None
    random_score: float | None = None
    references: tuple[float, float] | None = None  # (random, baseline) scores; None if degenerate

    def cell(self, multiplier: float, seed: int) -> RunResult:
        return self.runs[(float(multiplier), int(seed))]

    def mean_hz(self, multiplier: float) -> float:
        """Mean over seeds of the final last-100-episode decision rate."""
        return math.fsum(self.cell(multiplier, s).summary.hz for s in self.config.seeds) / len(self.config.seeds)

    def frontier(self) -> list[dict[str, Any]]:
        rows = []
        for m in self.config.multipliers:
            cells = [self.cell(m, s) for s in self.config.seeds]
            pooled = pool_summaries([c.summary for c in cells])
            rows.append(
                {
                    "env": self.config.env,
                    "multiplier": m,
                    "cost": self.base_cost * m,
                    "seeds": len(cells),
                    "hz_100": pooled.hz,
                    "task_return_100": pooled.task_return,
                    "net_return_100": pooled.net_return,
                }
            )
        return rows

    def rows(self) -> list[dict[str, Any]]:
        out = []
        refs = self.references
        for m in self.config.multipliers:
            for s in self.config.seeds:
                r = self.cell(m, s)
                summ = r.summary
                out.append(
                    {
                        "env": self.config.env,
                        "multiplier": m,
                        "cost": r.cost,
                        "seed": s,
                        "decisions": r.ledger.decisions,
                        "ticks": r.ledger.ticks,
                        "hz": r.ledger.hz,
                        "hz_100": summ.hz,
                        "task_return_100": summ.task_return,
                        "net_return_100": summ.net_return,
                        "normalized_score": normalized_score(summ.task_return, *refs) if refs else "",
                    }
                )
        return out


def resolve_cost(config: ExperimentConfig) -> tuple[float, Calibration | None]:
    if config.cost == "calibrate":
        cal = calibrate_cost(config)
        log.info("calibrated c = %.6g on %s (G_T=%.6g over %d ticks)", cal.cost, config.env, cal.task_return, cal.ticks)
        return cal.cost, cal
    return float(config.cost), None


def score_references(config: ExperimentConfig, cal: Calibration | None) -> tuple[float | None, tuple[float, float] | None]:
    """Random-policy score and the (random, baseline) pair used to normalise scores.

    The pair is None without a calibration or when the two scores coincide.
    """
    if cal is None:
        return None, None
    rand = random_policy_score(config)
    if rand == cal.baseline_score:
        log.warning("random and baseline scores coincide on %s; normalised scores left blank", config.env)
        return rand, None
    return rand, (rand, cal.baseline_score)


def run_cost_sweep(config: ExperimentConfig) -> SweepResult:
    """Train one compute agent per (multiplier, seed) at ``multiplier * c``."""
    base, cal = resolve_cost(config)
    rand, refs = score_references(config, cal)
    cells = [(m, s) for m in config.multipliers for s in config.seeds]
    results = parallel_map(_train_job, [(config, s, base * m, False, refs) for m, s in cells], config.workers)
    return SweepResult(config, base, dict(zip(cells, results)), cal, rand, refs)

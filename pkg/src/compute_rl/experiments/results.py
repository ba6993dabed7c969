"""Writing run and sweep artifacts: manifest.json, curves.csv, episodes.jsonl, sweep.csv."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Iterable, Sequence

from ..agents import save_checkpoint
from ..core import UsageError
from ..execution import trace_to_jsonl
from .config import ExperimentConfig, derive_seed
from .training import CURVE_COLUMNS, SWEEP_COLUMNS, Calibration, RunResult, SweepResult, version_stamp

MANIFEST = "manifest.json"
CURVES = "curves.csv"
EPISODES = "episodes.jsonl"
SWEEP = "sweep.csv"
FRONTIER = "frontier.csv"
FRONTIER_COLUMNS = ("env", "multiplier", "cost", "seeds", "hz_100", "task_return_100", "net_return_100")


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[dict[str, Any]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: row.get(k, "") for k in columns})


def read_csv(path: Path) -> list[dict[str, str]]:
    if not path.exists():
        raise UsageError(f"missing artifact: {path}")
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def read_manifest(directory: str | Path) -> dict[str, Any]:
    path = Path(directory) / MANIFEST
    if not path.exists():
        raise UsageError(f"missing artifact: {path}")
    return json.loads(path.read_text())


def run_record(r: RunResult) -> dict[str, Any]:
    """Manifest entry for one run: seeds, RNG stream seeds, ledger and audit."""
    s = r.summary
    env = r.config.env
    return {
        "seed": r.seed,
        "role": r.role,
        "cost": r.cost,
        "rng": {
            "agent_seed": derive_seed(r.seed, "agent", env),
            "episode_seed": derive_seed(r.seed, "env", env),
            "sticky": f"sticky-<episode seed> per episode, p={r.config.sticky}",
        },
        "decisions": r.ledger.decisions,
        "ticks": r.ledger.ticks,
        "hz": r.ledger.hz,
        "total_cost": r.ledger.total_cost,
        "tau_sum": r.tau_sum,
        "cost_audit": r.cost_audit_ok(),
        "tail_decisions": r.tail_decisions,
        "tail_ticks": r.tail_ticks,
        "task_total": r.task_total,
        "episodes": len(r.episodes),
        "final": {"task_return_100": s.task_return, "net_return_100": s.net_return, "hz_100": s.hz},
        "eval_returns": r.eval_returns,
    }


def calibration_record(cal: Calibration | None) -> dict[str, Any] | None:
    if cal is None:
        return None
    return {
        "cost": cal.cost,
        "raw": cal.raw,
        "task_return": cal.task_return,
        "ticks": cal.ticks,
        "baseline_score": cal.baseline_score,
    }


def _manifest(kind: str, config: ExperimentConfig, artifacts: list[str], **extra: Any) -> dict[str, Any]:
    return {
        "kind": kind,
        "config_hash": config.hash(),
        "version": version_stamp(),
        "config": config.to_dict(),
        "artifacts": artifacts,
        **extra,
    }


def _write_traces(fh, r: RunResult, **tags: Any) -> None:
    for episode, trace in r.traces:
        trace_to_jsonl(trace, fh, **tags, seed=r.seed, role=r.role, mode="train", episode=episode)
    for k, trace in enumerate(r.eval_traces):
        trace_to_jsonl(trace, fh, **tags, seed=r.seed, role=r.role, mode="eval", episode=k)


def write_run(
    directory: str | Path,
    config: ExperimentConfig,
    runs: Sequence[RunResult],
    calibration: Calibration | None = None,
    random_score: float | None = None,
) -> Path:
    """Write the artifacts of a ``train`` invocation (one or more seeds)."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / CURVES, CURVE_COLUMNS, (row for r in runs for row in r.curve))
    with open(out / EPISODES, "w") as fh:
        for r in runs:
            _write_traces(fh, r)
    artifacts = [CURVES, EPISODES]
    for r in runs:
        if r.agent is not None:
            name = f"checkpoint-{r.role}-{r.seed}.json"
            save_checkpoint(r.agent, out / name)
            artifacts.append(name)
    manifest = _manifest(
        "train",
        config,
        artifacts,
        cost=runs[0].cost if runs else None,
        calibration=calibration_record(calibration),
        random_score=random_score,
        runs=[run_record(r) for r in runs],
    )
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2) + "\n")
    return out


def write_sweep(directory: str | Path, sweep: SweepResult) -> Path:
    """Write sweep.csv, frontier.csv, the curves of every cell, traces and the manifest."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    config = sweep.config
    write_csv(out / SWEEP, SWEEP_COLUMNS, sweep.rows())
    write_csv(out / FRONTIER, FRONTIER_COLUMNS, sweep.frontier())
    curve_cols = ("multiplier",) + CURVE_COLUMNS
    rows: list[dict[str, Any]] = []
    if sweep.calibration is not None:
        rows.extend(row for r in sweep.calibration.baselines for row in r.curve)
    for (m, _), r in sweep.runs.items():
        rows.extend({"multiplier": m, **row} for row in r.curve)
    write_csv(out / CURVES, curve_cols, rows)
    with open(out / EPISODES, "w") as fh:
        for (m, _), r in sweep.runs.items():
            _write_traces(fh, r, multiplier=m)
    runs = [{"multiplier": m, **run_record(r)} for (m, _), r in sweep.runs.items()]
    baselines = [run_record(r) for r in sweep.calibration.baselines] if sweep.calibration else []
    manifest = _manifest(
        "sweep",
        config,
        [SWEEP, FRONTIER, CURVES, EPISODES],
        base_cost=sweep.base_cost,
        calibration=calibration_record(sweep.calibration),
        random_score=sweep.random_score,
        runs=runs,
        baselines=baselines,
    )
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2) + "\n")
    return out

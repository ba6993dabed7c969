"""Render SVG figures from run or sweep artifacts on disk."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("svg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..core import UsageError  # noqa: E402
from ..execution import read_trace_jsonl  # noqa: E402
from ..metrics import ema_rate_trace, rate_histogram  # noqa: E402
from .results import CURVES, EPISODES, SWEEP, read_csv, read_manifest  # noqa: E402

plt.rcParams["svg.hashsalt"] = "compute-rl"
MAX_EMA_EPISODES = 3


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _num(v: str) -> float:
    return float(v) if v != "" else float("nan")


def plot_learning_curves(curves: list[dict[str, str]], path: Path) -> Path:
    """Task return and decision rate against decisions, coloured by training progress."""
    fig, (ax_r, ax_h) = plt.subplots(1, 2, figsize=(10, 4))
    groups: dict[tuple, list[dict[str, str]]] = defaultdict(list)
    for row in curves:
        if row["agent"] == "compute":
            groups[(row.get("multiplier", ""), row["seed"])].append(row)
    if not groups:
        raise UsageError("curves.csv holds no compute-agent rows to plot")
    budget = max(float(r["decisions"]) for rows in groups.values() for r in rows)
    for rows in groups.values():
        d = np.array([float(r["decisions"]) for r in rows])
        ret = np.array([_num(r["task_return_100"]) for r in rows])
        hz = np.array([_num(r["hz_100"]) for r in rows])
        ax_r.plot(d, ret, color="0.8", lw=0.6, zorder=1)
        sc = ax_r.scatter(d, ret, c=d / budget, cmap="viridis", s=6, zorder=2)
        ax_h.scatter(hz, ret, c=d / budget, cmap="viridis", s=6)
    ax_r.set_xlabel("decisions")
    ax_r.set_ylabel("task return (last 100 episodes)")
    ax_h.set_xlabel("decision rate, Hz (last 100 episodes)")
    ax_h.set_ylabel("task return (last 100 episodes)")
    fig.colorbar(sc, ax=ax_h, label="fraction of training")
    return _save(fig, path)


def plot_rate_histogram(traces: list, path: Path, window_ticks: int, tick_rate: float) -> Path:
    counts, edges = rate_histogram(traces, window_ticks, tick_rate=tick_rate)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(edges[:-1], counts, width=np.diff(edges), align="edge", edgecolor="k", lw=0.4)
    ax.set_xlabel(f"decision rate over {window_ticks}-tick windows (Hz)")
    ax.set_ylabel("windows")
    return _save(fig, path)


def plot_ema_traces(traces: list, path: Path, beta: float, tick_rate: float) -> Path:
    n = len(traces)
    fig, axes = plt.subplots(n, 1, figsize=(10, 2.2 * n), squeeze=False)
    for ax, trace in zip(axes[:, 0], traces):
        y = ema_rate_trace(trace, beta, tick_rate)
        ticks = np.arange(len(y))
        ax.plot(ticks, y, lw=0.8)
        phases = sorted({t.phase for t in trace if t.phase})
        shade = dict(zip(phases, ("tab:orange", "tab:green", "tab:red", "tab:blue", "tab:purple")))
        start = 0
        for i in range(1, len(trace) + 1):
            if i == len(trace) or trace[i].phase != trace[start].phase:
                if trace[start].phase in shade:
                    ax.axvspan(start, i, color=shade[trace[start].phase], alpha=0.12, lw=0)
                start = i
        ax.set_ylabel("Hz")
        ax.set_ylim(0, tick_rate)
        if phases:
            handles = [plt.Rectangle((0, 0), 1, 1, color=shade[p], alpha=0.3) for p in phases]
            ax.legend(handles, phases, loc="upper right", fontsize=7)
    axes[-1, 0].set_xlabel(f"tick (EMA beta = {beta})")
    return _save(fig, path)


def plot_frontier(rows: list[dict[str, str]], path: Path, env: str) -> Path:
    """Task return against decision rate: one point per (multiplier, seed) plus per-multiplier means."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    by_mult: dict[float, list[tuple[float, float]]] = defaultdict(list)
    for r in rows:
        by_mult[float(r["multiplier"])].append((_num(r["hz_100"]), _num(r["task_return_100"])))
    cmap = plt.get_cmap("plasma")
    mults = sorted(by_mult, reverse=True)
    for i, m in enumerate(mults):
        pts = np.array(by_mult[m])
        col = cmap(i / max(len(mults) - 1, 1))
        ax.scatter(pts[:, 0], pts[:, 1], color=col, s=12, alpha=0.5)
        ax.scatter(pts[:, 0].mean(), pts[:, 1].mean(), color=col, s=80, marker="D", edgecolor="k", label=f"{m:g}c")
    ax.set_xlabel("decision rate, Hz (last 100 episodes)")
    ax.set_ylabel("task return (last 100 episodes)")
    ax.set_title(env)
    ax.legend(fontsize=8)
    return _save(fig, path)


def _load_traces(directory: Path, mode: str) -> list:
    path = directory / EPISODES
    if not path.exists():
        raise UsageError(f"missing artifact: {path}")
    with open(path) as fh:
        groups = [(tags, tr) for tags, tr in read_trace_jsonl(fh) if tags.get("role") == "compute"]
    picked = [tr for tags, tr in groups if tags.get("mode") == mode]
    if not picked:
        picked = [tr for _, tr in groups]
    return picked


def emit_report(directory: str | Path) -> list[Path]:
    """Render every figure the artifacts in ``directory`` support; returns the SVG paths."""
    d = Path(directory)
    manifest = read_manifest(d)
    cfg = manifest["config"]
    tick_rate = float(cfg["tick_rate"])
    curves = read_csv(d / CURVES)
    outputs = [plot_learning_curves(curves, d / "learning_curves.svg")]
    traces = _load_traces(d, "eval")
    if traces:
        outputs.append(plot_rate_histogram(traces, d / "rate_histogram.svg", int(cfg["window_ticks"]), tick_rate))
        outputs.append(plot_ema_traces(traces[:MAX_EMA_EPISODES], d / "ema_traces.svg", float(cfg["ema_beta"]), tick_rate))
    if manifest["kind"] == "sweep":
        outputs.append(plot_frontier(read_csv(d / SWEEP), d / f"frontier_{cfg['env']}.svg", cfg["env"]))
    return outputs

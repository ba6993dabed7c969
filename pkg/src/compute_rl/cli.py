"""Command-line entry point: train, calibrate, sweep, report, oracle."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Sequence

import yaml

from .agents import AgentConfig, smdp_value_iteration
from .core import ComputeCostModel, UsageError, option_set
from .envs import make_env
from .experiments.config import ExperimentConfig, load_config
from .experiments.report import emit_report
from .experiments.results import write_run, write_sweep
from .experiments.training import (
    calibrate_cost,
    resolve_cost,
    run_cost_sweep,
    run_training,
    score_references,
)

OUTPUT_ROOT_VAR = "COMPUTE_RL_OUT"
log = logging.getLogger("compute_rl")


def _int_list(text: str) -> tuple[int, ...]:
    """``"0,1,2"`` or ``"0-9"`` (inclusive range)."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return tuple(out)


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in text.split(",") if p.strip())


def _cost(text: str) -> float | str:
    return text if text == "calibrate" else float(text)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML/JSON config file, or a manifest.json to rerun")
    p.add_argument("--env", help="linetrack, wavecollect or chain")
    p.add_argument("--agent", choices=("tabular", "neural"))
    p.add_argument("--budget", type=int, help="decision budget D per run")
    p.add_argument("--seeds", type=_int_list, help="e.g. 0-9 or 0,3,5")
    p.add_argument("--cost", type=_cost, help="per-decision cost, or 'calibrate'")
    p.add_argument("--cost-min", type=float, dest="cost_min")
    p.add_argument("--multipliers", type=_float_list, help="e.g. 10,5,1,0.2,0.1")
    p.add_argument("--durations", type=_int_list, help="option durations, e.g. 1,2,4,8")
    p.add_argument("--sticky", type=float, help="sticky-action probability")
    p.add_argument("--tick-cap", type=int, dest="tick_cap")
    p.add_argument("--eval-episodes", type=int, dest="eval_episodes")
    p.add_argument("--workers", type=int)
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override any config key; nested keys as agent_config.learning_rate or env_params.width",
    )
    p.add_argument("--out", help=f"output directory (default: ${OUTPUT_ROOT_VAR} or ./runs)")


FLAG_KEYS = (
    "env",
    "agent",
    "budget",
    "seeds",
    "cost",
    "cost_min",
    "multipliers",
    "durations",
    "sticky",
    "tick_cap",
    "eval_episodes",
    "workers",
)


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    data: dict[str, Any] = load_config(args.config).to_dict() if args.config else {}
    for item in args.set:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        value = yaml.safe_load(raw)
        if "." in key:
            outer, inner = key.split(".", 1)
            if outer not in ("agent_config", "env_params"):
                raise UsageError(f"only agent_config.* and env_params.* keys nest, got {key!r}")
            data.setdefault(outer, {})
            if isinstance(data[outer], AgentConfig):
                data[outer] = data[outer].to_dict()
            data[outer][inner] = value
        else:
            data[key] = value
    for key in FLAG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    if getattr(args, "baseline", False):
        data["with_baseline"] = True
    return ExperimentConfig.from_dict(data)


def output_dir(args: argparse.Namespace, command: str, config: ExperimentConfig) -> Path:
    if args.out:
        return Path(args.out)
    root = Path(os.environ.get(OUTPUT_ROOT_VAR) or "runs")
    return root / f"{command}-{config.env}-{config.hash()}"


def cmd_train(args: argparse.Namespace) -> dict[str, Any]:
    config = build_config(args)
    cost, cal = resolve_cost(config)
    rand, refs = score_references(config, cal)
    runs = [run_training(config, s, cost, references=refs, keep_agent=True) for s in config.seeds]
    if config.with_baseline:
        if cal is not None:
            runs.extend(cal.baselines)
        else:
            runs.extend(run_training(config, s, cost, baseline=True, keep_agent=True) for s in config.seeds)
    out = write_run(output_dir(args, "train", config), config, runs, cal, rand)
    return {"command": "train", "out": str(out), "cost": cost, "config_hash": config.hash()}


def cmd_calibrate(args: argparse.Namespace) -> dict[str, Any]:
    config = build_config(args)
    cal = calibrate_cost(config)
    return {
        "command": "calibrate",
        "env": config.env,
        "cost": cal.cost,
        "raw": cal.raw,
        "task_return": cal.task_return,
        "ticks": cal.ticks,
        "baseline_score": cal.baseline_score,
        "config_hash": config.hash(),
    }


def cmd_sweep(args: argparse.Namespace) -> dict[str, Any]:
    config = build_config(args)
    sweep = run_cost_sweep(config)
    out = write_sweep(output_dir(args, "sweep", config), sweep)
    return {"command": "sweep", "out": str(out), "base_cost": sweep.base_cost, "config_hash": config.hash()}


def cmd_report(args: argparse.Namespace) -> dict[str, Any]:
    paths = emit_report(args.directory)
    return {"command": "report", "figures": [str(p) for p in paths]}


def cmd_oracle(args: argparse.Namespace) -> dict[str, Any]:
    params = {}
    for item in args.param:
        key, _, raw = item.partition("=")
        params[key] = yaml.safe_load(raw)
    env = make_env(args.env, params)
    options = option_set(env.n_actions, args.durations)
    q = smdp_value_iteration(env, options, args.gamma, ComputeCostModel(args.cost), tolerance=args.tolerance)
    result = {
        "env": args.env,
        "params": env.params(),
        "gamma": args.gamma,
        "cost": args.cost,
        "options": [[o.action, o.duration] for o in options],
        "q": q.table,
    }
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(json.dumps(result, indent=2) + "\n")
        return {"command": "oracle", "out": args.out}
    return result


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="compute-rl", description="Compute-aware RL experiments on toy environments.")
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the compute agent on every configured seed")
    _add_config_flags(p)
    p.add_argument("--baseline", action="store_true", help="also train the fixed-rate baseline")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("calibrate", help="derive c = G_T / T from fixed-rate baselines")
    _add_config_flags(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("sweep", help="cost sweep over multipliers x seeds")
    _add_config_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="render SVG figures from a run or sweep directory")
    p.add_argument("directory")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("oracle", help="exact option values by semi-MDP value iteration")
    p.add_argument("--env", default="chain")
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE", help="environment parameter")
    p.add_argument("--gamma", type=float, default=0.9)
    p.add_argument("--cost", type=float, default=0.0)
    p.add_argument("--durations", type=_int_list, default=(1, 2, 4, 8))
    p.add_argument("--tolerance", type=float, default=1e-12)
    p.add_argument("--out")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        result = args.func(args)
    except (UsageError, ValueError, TypeError) as exc:
        print(json.dumps({"error": "usage", "message": str(exc)}), file=sys.stderr)
        return 2
    except OSError as exc:
        print(json.dumps({"error": "io", "message": str(exc)}), file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - one-line error contract
        print(json.dumps({"error": "internal", "type": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    print(json.dumps(result))
    return 0


if __name__ == "__main__":
    sys.exit(main())

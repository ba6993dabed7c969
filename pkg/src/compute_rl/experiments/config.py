from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import yaml

from ..agents import AgentConfig
from ..core import DEFAULT_DURATIONS, DEFAULT_TICK_RATE, UsageError, validate_durations
from ..envs import ENVIRONMENTS
from ..metrics import DEFAULT_EMA_BETA, DEFAULT_WINDOW_TICKS

DEFAULT_MULTIPLIERS = (10.0, 5.0, 1.0, 0.2, 0.1)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce a run or a sweep.

    ``cost`` is either a number (the per-decision cost, or the base cost a
    sweep multiplies) or ``"calibrate"`` to derive it from fixed-rate
    baseline runs at the same decision budget.
    """

    env: str = "linetrack"
    env_params: dict[str, Any] = field(default_factory=dict)
    sticky: float = 0.25
    agent: str = "tabular"
    agent_config: AgentConfig = field(default_factory=AgentConfig)
    durations: tuple[int, ...] = DEFAULT_DURATIONS
    budget: int = 200_000
    seeds: tuple[int, ...] = tuple(range(10))
    cost: float | str = "calibrate"
    cost_min: float = 0.0
    multipliers: tuple[float, ...] = DEFAULT_MULTIPLIERS
    tick_cap: int = 4000
    tick_rate: float = DEFAULT_TICK_RATE
    checkpoint_every: int = 0
    ema_beta: float = DEFAULT_EMA_BETA
    window_ticks: int = DEFAULT_WINDOW_TICKS
    trace_episodes: int = 3
    eval_episodes: int = 0
    with_baseline: bool = False  # ``train`` also trains the fixed-rate baseline
    random_episodes: int = 100
    workers: int = 1
    output_dir: str = ""

    def __post_init__(self) -> None:
        if self.env not in ENVIRONMENTS:
            raise UsageError(f"unknown environment {self.env!r}; choose from {sorted(ENVIRONMENTS)}")
        if self.agent not in ("tabular", "neural"):
            raise UsageError(f"agent must be 'tabular' or 'neural', got {self.agent!r}")
        if self.budget <= 0:
            raise UsageError(f"decision budget must be positive, got {self.budget}")
        if not self.seeds:
            raise UsageError("seed list is empty")
        if any(m <= 0 for m in self.multipliers) or not self.multipliers:
            raise UsageError(f"sweep multipliers must be positive, got {self.multipliers}")
        if isinstance(self.cost, str):
            if self.cost != "calibrate":
                raise UsageError(f"cost must be a number or 'calibrate', got {self.cost!r}")
        elif self.cost < 0:
            raise UsageError(f"cost must be >= 0, got {self.cost}")
        if self.cost_min < 0:
            raise UsageError("cost_min must be >= 0")
        if not 0.0 <= self.sticky <= 1.0:
            raise UsageError(f"sticky must lie in [0, 1], got {self.sticky}")
        if self.tick_cap < 1 or self.tick_rate <= 0:
            raise UsageError("tick_cap and tick_rate must be positive")
        if self.checkpoint_every < 0 or self.workers < 1:
            raise UsageError("checkpoint_every must be >= 0 and workers >= 1")
        object.__setattr__(self, "durations", validate_durations(self.durations))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "multipliers", tuple(float(m) for m in self.multipliers))
        if isinstance(self.agent_config, dict):
            object.__setattr__(self, "agent_config", AgentConfig(**self.agent_config))

    @property
    def checkpoint_interval(self) -> int:
        return self.checkpoint_every or max(self.budget // 100, 1)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["agent_config"] = self.agent_config.to_dict()
        for k in ("durations", "seeds", "multipliers"):
            d[k] = list(d[k])
        return d

    def content_dict(self) -> dict[str, Any]:
        """Config fields that affect results (not where they are written or how many workers)."""
        d = self.to_dict()
        d.pop("output_dir")
        d.pop("workers")
        return d

    def hash(self) -> str:
        blob = json.dumps(self.content_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def with_overrides(self, **overrides: Any) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        if "agent_config" in data:
            agent_known = {f.name for f in fields(AgentConfig)}
            bad = set(data["agent_config"]) - agent_known
            if bad:
                raise UsageError(f"unknown agent_config keys: {sorted(bad)}")
            data["agent_config"] = AgentConfig(**data["agent_config"])
        for k in ("durations", "seeds", "multipliers"):
            if k in data:
                data[k] = tuple(data[k])
        return cls(**data)


BUILTIN_DIR = Path(__file__).resolve().parent.parent / "configs"


def builtin_configs() -> list[str]:
    return sorted(p.stem for p in BUILTIN_DIR.glob("*.yaml"))


def builtin_config(name: str) -> ExperimentConfig:
    path = BUILTIN_DIR / f"{name}.yaml"
    if not path.exists():
        raise UsageError(f"no built-in config {name!r}; choose from {builtin_configs()}")
    return load_config(path)


def load_config(path: str | Path) -> ExperimentConfig:
    """Read a YAML/JSON config, the config embedded in a run manifest, or a built-in config by name."""
    p = Path(path)
    if not p.exists():
        if p.suffix == "" and p.name in builtin_configs():
            return builtin_config(p.name)
        raise UsageError(f"config file not found: {path}")
    text = p.read_text()
    data = yaml.safe_load(text) or {}
    if not isinstance(data, dict):
        raise UsageError(f"{path}: config must be a mapping")
    if "config" in data and "config_hash" in data:
        data = data["config"]
    return ExperimentConfig.from_dict(data)


def dump_config(config: ExperimentConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=False)


def derive_seed(seed: int, *tags: object) -> int:
    """Stable 32-bit stream seed for (run seed, purpose tags)."""
    key = "/".join([str(seed), *map(str, tags)])
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:4], "little")

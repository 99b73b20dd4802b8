"""Plain-text key=value experiment configuration.

One flat file configures everything; keys use dotted prefixes per block,
e.g.::

    scenario.load = 0.6
    scenario.velocity = 50
    sim.base_arrival_rate = 3.4
    mro.tau_events = 10
    reward.variant = cio_penalty
    grid.train_loads = 0.2, 0.4, 0.6, 0.7
    cql.alpha = 1.0
    dt.context = 4

Unknown keys are rejected (typos should not silently vanish). Values are
coerced from the target field's default type; lists are comma-separated.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field, fields
from pathlib import Path

from .mro import IssueWeights, MroThresholds
from .rewards import RewardConfig
from .sim import A3Config, ScenarioConfig, SimParams


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GridConfig:
    """Scenario grids for dataset generation and evaluation."""

    train_loads: tuple = (0.2, 0.4, 0.6, 0.7)
    train_velocities: tuple = (4.0, 50.0, 120.0)
    train_seeds: tuple = (1, 2)
    val_loads: tuple = (0.5, 0.6, 0.7)
    val_velocities: tuple = (25.0, 85.0)
    val_seeds: tuple = (3, 4)
    episodes_per_cell: int = 4


@dataclass(frozen=True)
class CqlParams:
    hidden: int = 64
    gamma: float = 0.99
    alpha: float = 1.0
    learning_rate: float = 1e-3
    batch_size: int = 128
    steps: int = 6000
    target_sync: int = 200
    huber_delta: float = 1.0
    divergence_threshold: float = 1e4
    divergence_patience: int = 50
    seed: int = 0
    filter_rtg: float = 29.0
    filter_zero_failures_only: bool = True


@dataclass(frozen=True)
class DtParams:
    context: int = 4
    embed: int = 64
    blocks: int = 2
    learning_rate: float = 1e-3
    batch_size: int = 64
    steps: int = 6000
    seed: int = 0
    target_rtg_multiplier: float = 1.0


@dataclass(frozen=True)
class DataParams:
    policies: tuple = ("rnd", "up", "down", "mro")
    episodes_per_cell: int = 4


@dataclass
class ExperimentConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    sim: SimParams = field(default_factory=SimParams)
    mro_weights: IssueWeights = field(default_factory=IssueWeights)
    mro_thresholds: MroThresholds = field(default_factory=MroThresholds)
    reward: RewardConfig = field(default_factory=RewardConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    cql: CqlParams = field(default_factory=CqlParams)
    dt: DtParams = field(default_factory=DtParams)
    data: DataParams = field(default_factory=DataParams)


_BLOCKS = {
    "scenario": ("scenario", ScenarioConfig),
    "sim": ("sim", SimParams),
    "a3": ("sim.a3", A3Config),
    "mro_weights": ("mro_weights", IssueWeights),
    "mro": ("mro_thresholds", MroThresholds),
    "reward": ("reward", RewardConfig),
    "grid": ("grid", GridConfig),
    "cql": ("cql", CqlParams),
    "dt": ("dt", DtParams),
    "data": ("data", DataParams),
}


def parse_kv_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def _coerce(raw: str, like) -> object:
    if isinstance(like, bool):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"cannot parse boolean from {raw!r}")
    if isinstance(like, int):
        return int(raw)
    if isinstance(like, float):
        return float(raw)
    if isinstance(like, tuple):
        items = [x.strip() for x in raw.split(",") if x.strip()]
        inner = like[0] if like else 0.0
        return tuple(_coerce(x, inner) for x in items)
    return raw


def _apply_block(obj, updates: dict[str, str]):
    if not updates:
        return obj
    known = {f.name: getattr(obj, f.name) for f in fields(obj)}
    new = {}
    for name, raw in updates.items():
        if name not in known:
            raise ConfigError(f"unknown field {name!r} for {type(obj).__name__}")
        new[name] = _coerce(raw, known[name])
    return dataclasses.replace(obj, **new)


def build_config(kv: dict[str, str]) -> ExperimentConfig:
    cfg = ExperimentConfig()
    grouped: dict[str, dict[str, str]] = {}
    for key, value in kv.items():
        if "." not in key:
            raise ConfigError(f"key {key!r} needs a block prefix, e.g. scenario.load")
        block, name = key.split(".", 1)
        if block not in _BLOCKS:
            raise ConfigError(f"unknown config block {block!r}")
        grouped.setdefault(block, {})[name] = value

    for block, updates in grouped.items():
        path, _ = _BLOCKS[block]
        if path == "sim.a3":
            cfg.sim = dataclasses.replace(cfg.sim, a3=_apply_block(cfg.sim.a3, updates))
        elif path == "reward":
            # issue weights ride along inside the reward config
            cfg.reward = _apply_block(cfg.reward, updates)
        else:
            setattr(cfg, path, _apply_block(getattr(cfg, path), updates))
    # rule weights and reward weights are the same quantity; keep them aligned
    cfg.reward = dataclasses.replace(cfg.reward, issue_weights=cfg.mro_weights)
    return cfg


def load_config(path: str | Path | None, overrides: dict[str, str] | None = None) -> ExperimentConfig:
    kv: dict[str, str] = {}
    if path is not None:
        kv.update(parse_kv_text(Path(path).read_text()))
    if overrides:
        kv.update({k: str(v) for k, v in overrides.items() if v is not None})
    return build_config(kv)


def dump_config(cfg: ExperimentConfig) -> str:
    """Canonical flat dump; input to the config hash."""
    lines = []

    def emit(prefix: str, obj):
        for f in fields(obj):
            v = getattr(obj, f.name)
            if dataclasses.is_dataclass(v):
                emit(f"{prefix}.{f.name}", v)
            elif isinstance(v, tuple):
                lines.append(f"{prefix}.{f.name} = {', '.join(repr(x) for x in v)}")
            else:
                lines.append(f"{prefix}.{f.name} = {v!r}")

    for f in fields(cfg):
        emit(f.name, getattr(cfg, f.name))
    return "\n".join(sorted(lines)) + "\n"


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(dump_config(cfg).encode()).hexdigest()[:12]

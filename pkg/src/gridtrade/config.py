"""Experiment configuration: YAML loading, validation, defaults.

A config file has four top-level blocks (scenario, algorithm, training,
output_dir). Unknown keys anywhere are rejected by name so typos fail fast.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import yaml

from .agents.qlearn import Hyperparams
from .scenario import ScenarioConfig


class ConfigError(ValueError):
    pass


# algorithm name -> (agent family, default action space)
ALGORITHMS = {
    "baseline": (None, "res"),
    "dqn": ("dqn", "res"),
    "n_dqn": ("dqn", "ut_res"),
    "drqn": ("drqn", "res"),
    "n_drqn": ("drqn", "ut_res"),
    "bi_drqn": ("bi_drqn", "res"),
    "n_bi_drqn": ("bi_drqn", "ut_res"),
    "ppo": ("ppo", "res"),
    "n_ppo": ("ppo", "ut_res"),
}

COMPARE_DEFAULT = ("dqn", "drqn", "bi_drqn", "ppo", "n_dqn", "n_drqn", "n_bi_drqn", "n_ppo")

# family-specific hyperparameter defaults on top of Hyperparams()
FAMILY_DEFAULTS = {
    "dqn": {"update_every": 8},
    "drqn": {"update_every": 32},
    "bi_drqn": {"update_every": 32},
    "ppo": {"gamma": 0.99},
}


@dataclass
class AlgorithmConfig:
    name: str = "baseline"
    gcn: bool = False
    action_space: str | None = None      # default derived from the name
    hyperparams: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in ALGORITHMS:
            raise ConfigError(
                f"unknown algorithm {self.name!r}; choose one of {sorted(ALGORITHMS)}")
        if self.action_space is None:
            self.action_space = ALGORITHMS[self.name][1]
        if self.action_space not in ("res", "ut_res"):
            raise ConfigError(f"action_space must be 'res' or 'ut_res', got {self.action_space!r}")

    @property
    def family(self) -> str | None:
        return ALGORITHMS[self.name][0]

    def build_hyperparams(self) -> Hyperparams:
        values = dict(FAMILY_DEFAULTS.get(self.family or "", {}))
        values.update(self.hyperparams)
        known = {f.name for f in dataclasses.fields(Hyperparams)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown hyperparams: {sorted(unknown)}")
        try:
            return Hyperparams(**values)
        except ValueError as exc:
            raise ConfigError(f"invalid hyperparams: {exc}") from exc


@dataclass
class TrainingConfig:
    epochs: int = 200
    days_pool: int = 30
    eval_days: int = 30
    seeds: tuple = (0, 1, 2, 3, 4)
    workers: int = 0      # 0: use the cpu count

    def __post_init__(self):
        if self.epochs < 1 or self.days_pool < 1 or self.eval_days < 1:
            raise ConfigError("epochs, days_pool and eval_days must be >= 1")
        if not self.seeds:
            raise ConfigError("need at least one seed")


@dataclass
class ExperimentConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    algorithm: AlgorithmConfig = field(default_factory=AlgorithmConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    compare_algorithms: tuple = COMPARE_DEFAULT
    output_dir: str = "runs/out"

    def canonical_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True, default=str)

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]


def _build_section(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    coerced = {}
    for key, value in data.items():
        if isinstance(value, list):
            value = tuple(value) if key in ("seeds", "ccec", "duration_range") else value
        coerced[key] = value
    try:
        return cls(**coerced)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def from_mapping(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    known = {"scenario", "algorithm", "training", "compare_algorithms", "output_dir"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    cfg = ExperimentConfig(
        scenario=_build_section(ScenarioConfig, data.get("scenario", {}), "scenario"),
        algorithm=_build_section(AlgorithmConfig, data.get("algorithm", {}), "algorithm"),
        training=_build_section(TrainingConfig, data.get("training", {}), "training"),
        output_dir=data.get("output_dir", "runs/out"),
    )
    compare = data.get("compare_algorithms")
    if compare is not None:
        for name in compare:
            if name not in ALGORITHMS or name == "baseline":
                raise ConfigError(f"compare_algorithms: invalid entry {name!r}")
        cfg = dataclasses.replace(cfg, compare_algorithms=tuple(compare))
    return cfg


def load_config(path) -> ExperimentConfig:
    """Parse and validate a YAML experiment file."""
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: YAML parse error: {exc}") from exc
    return from_mapping(data or {})

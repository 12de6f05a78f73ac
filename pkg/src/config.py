"""
Configuration Module
Loads the experiment document (YAML or JSON) into frozen dataclasses and
applies environment overrides from .env.
"""

import os
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import yaml
from dotenv import load_dotenv

from src.errors import ConfigurationError
from src.reward_metrics import PENALTY_PRESETS, RewardConfig

load_dotenv()

logger = logging.getLogger(__name__)

DEFAULT_AGENTS = ("NoR", "OneR", "IRCoT")
DEFAULT_SCHEMA = ("A", "B", "C")
ACTION_SPACE_MODES = ("individual", "collaborative")
BACKEND_KINDS = ("simulator", "remote")


@dataclass(frozen=True)
class ActionSpaceConfig:
    mode: str = "collaborative"
    max_edges: Optional[int] = None
    max_agents: Optional[int] = None
    forbidden_edges: Tuple[Tuple[str, str], ...] = ()

    def __post_init__(self):
        if self.mode not in ACTION_SPACE_MODES:
            raise ConfigurationError(f"action_space.mode must be one of {ACTION_SPACE_MODES}, got {self.mode!r}")
        if self.max_edges is not None and self.max_edges < 1:
            raise ConfigurationError("action_space.max_edges must be positive")
        if self.max_agents is not None and self.max_agents < 1:
            raise ConfigurationError("action_space.max_agents must be positive")

    @property
    def effective_max_edges(self) -> Optional[int]:
        return 1 if self.mode == "individual" else self.max_edges


@dataclass(frozen=True)
class BanditConfig:
    alpha: float = 2.0
    d: Optional[int] = None

    def __post_init__(self):
        if self.alpha < 0:
            raise ConfigurationError(f"bandit.alpha must be >= 0, got {self.alpha}")
        if self.d is not None and self.d < 1:
            raise ConfigurationError(f"bandit.d must be >= 1, got {self.d}")


@dataclass(frozen=True)
class RewardSection:
    beta: float = 0.5
    penalty_preset: str = "collaborative"

    def __post_init__(self):
        if self.penalty_preset not in PENALTY_PRESETS:
            raise ConfigurationError(f"reward.penalty_preset must be one of {sorted(PENALTY_PRESETS)}")

    def build(self) -> RewardConfig:
        return RewardConfig(beta=self.beta, penalty_preset=self.penalty_preset)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigurationError(f"train.epochs must be >= 1, got {self.epochs}")


@dataclass(frozen=True)
class BaselineConfig:
    epochs: int = 200
    learning_rate: float = 0.05
    baseline_window: int = 50
    epsilon: float = 1e-3

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigurationError("baseline.epochs must be >= 1")


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "simulator"
    profile_path: Optional[str] = None
    latency_cv: float = 0.1
    copy_factor: float = 0.9
    endpoints: Dict[str, str] = field(default_factory=dict)
    timeout_s: float = 30.0
    max_workers: int = 1

    def __post_init__(self):
        if self.kind not in BACKEND_KINDS:
            raise ConfigurationError(f"backend.kind must be one of {BACKEND_KINDS}, got {self.kind!r}")
        if self.timeout_s <= 0:
            raise ConfigurationError("backend.timeout_s must be > 0")


@dataclass(frozen=True)
class DataConfig:
    train_path: Optional[str] = None
    test_path: Optional[str] = None
    train_size: int = 210
    test_size: int = 51


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "runs/default"
    diagnostics_stride: int = 1
    selection_window: int = 100

    def __post_init__(self):
        if self.diagnostics_stride < 1 or self.selection_window < 1:
            raise ConfigurationError("output.diagnostics_stride and output.selection_window must be >= 1")


@dataclass(frozen=True)
class EvaluationConfig:
    repeats: int = 1

    def __post_init__(self):
        if self.repeats < 1:
            raise ConfigurationError("evaluation.repeats must be >= 1")


@dataclass(frozen=True)
class ExperimentConfig:
    agents: Tuple[str, ...] = DEFAULT_AGENTS
    schema: Tuple[str, ...] = DEFAULT_SCHEMA
    action_space: ActionSpaceConfig = field(default_factory=ActionSpaceConfig)
    bandit: BanditConfig = field(default_factory=BanditConfig)
    reward: RewardSection = field(default_factory=RewardSection)
    train: TrainConfig = field(default_factory=TrainConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    backend: BackendConfig = field(default_factory=BackendConfig)
    data: DataConfig = field(default_factory=DataConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)

    def __post_init__(self):
        if not self.agents:
            raise ConfigurationError("agents must not be empty")
        if not self.schema:
            raise ConfigurationError("schema must not be empty")
        if len(set(self.schema)) != len(self.schema):
            raise ConfigurationError(f"schema labels must be unique: {list(self.schema)}")
        if self.bandit.d is not None and self.bandit.d != len(self.schema):
            raise ConfigurationError(
                f"bandit.d={self.bandit.d} does not match the one-hot schema size {len(self.schema)}"
            )

    @property
    def dimension(self) -> int:
        return len(self.schema)

    def with_seed(self, seed: Optional[int]) -> "ExperimentConfig":
        if seed is None:
            return self
        return replace(self, train=replace(self.train, seed=int(seed)))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


_SECTIONS = {
    "action_space": ActionSpaceConfig,
    "bandit": BanditConfig,
    "reward": RewardSection,
    "train": TrainConfig,
    "baseline": BaselineConfig,
    "backend": BackendConfig,
    "data": DataConfig,
    "output": OutputConfig,
    "evaluation": EvaluationConfig,
}


def _build_section(name: str, values: Any):
    cls = _SECTIONS[name]
    if values is None:
        return cls()
    if not isinstance(values, dict):
        raise ConfigurationError(f"config section {name!r} must be a mapping")
    allowed = set(cls.__dataclass_fields__)
    unknown = set(values) - allowed
    if unknown:
        raise ConfigurationError(f"unknown keys in {name!r}: {sorted(unknown)}")
    if name == "action_space" and "forbidden_edges" in values:
        values = dict(values, forbidden_edges=tuple(tuple(pair) for pair in values["forbidden_edges"] or ()))
    try:
        return cls(**values)
    except TypeError as e:
        raise ConfigurationError(f"invalid {name!r} section: {e}")


def config_from_dict(document: Dict[str, Any]) -> ExperimentConfig:
    document = dict(document or {})
    unknown = set(document) - set(_SECTIONS) - {"agents", "schema"}
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    kwargs: Dict[str, Any] = {name: _build_section(name, document.get(name)) for name in _SECTIONS}
    if "agents" in document:
        kwargs["agents"] = tuple(document["agents"])
    if "schema" in document:
        kwargs["schema"] = tuple(document["schema"])
    return apply_env_overrides(ExperimentConfig(**kwargs))


def apply_env_overrides(config: ExperimentConfig) -> ExperimentConfig:
    """AQA_OUTPUT_DIR, AQA_REMOTE_TIMEOUT_S and AQA_ENDPOINT_<AGENT>."""
    output_dir = os.getenv("AQA_OUTPUT_DIR")
    if output_dir:
        config = replace(config, output=replace(config.output, dir=output_dir))

    timeout = os.getenv("AQA_REMOTE_TIMEOUT_S")
    endpoints = dict(config.backend.endpoints)
    for agent in config.agents:
        url = os.getenv(f"AQA_ENDPOINT_{agent.upper()}")
        if url:
            endpoints[agent] = url
    backend = replace(
        config.backend,
        endpoints=endpoints,
        timeout_s=float(timeout) if timeout else config.backend.timeout_s,
    )
    return replace(config, backend=backend)


def load_config(path: Optional[Path] = None) -> ExperimentConfig:
    """Read a YAML/JSON experiment document; no path gives the defaults."""
    if path is None:
        return apply_env_overrides(ExperimentConfig())
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file {path} does not exist")
    try:
        with open(path, 'r') as f:
            document = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigurationError(f"cannot parse config {path}: {e}")
    logger.info(f"Loaded config from {path}")
    return config_from_dict(document)


def log_level() -> str:
    return os.getenv("AQA_LOG_LEVEL", "INFO").upper()

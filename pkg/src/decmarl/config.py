"""Run configuration and the A1..A5 agent-type ladder."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml


class ConfigurationError(ValueError):
    """Raised for invalid layouts, scenario settings or config files."""


@dataclass(frozen=True)
class AgentTypeFlags:
    use_mental_state: bool
    use_time_awareness: bool
    use_communication: bool
    use_goal_awareness: bool

    @property
    def intrinsic_reward(self) -> bool:
        # A1/A2 have no time awareness, so the novelty term of the reward is off
        return self.use_mental_state and self.use_time_awareness


AGENT_TYPES: dict[str, AgentTypeFlags] = {
    "a1": AgentTypeFlags(False, False, False, False),
    "a2": AgentTypeFlags(True, False, False, False),
    "a3": AgentTypeFlags(True, True, False, False),
    "a4": AgentTypeFlags(True, True, True, False),
    "a5": AgentTypeFlags(True, True, True, True),
}

ENV_SIZES = ("base", "large")
DIFFICULTIES = ("easy", "hard")
SCENARIOS = (1, 2)
NOVELTY_MODES = ("time", "count")


@dataclass
class ScenarioConfig:
    """Everything needed to reproduce one run, given a seed.

    Defaults follow the published experimental setup; the knobs the
    original setup leaves open (observation radius, toggle probability,
    exploration schedule, replay capacity) carry the defaults documented
    in the README.
    """

    env_size: str = "base"
    difficulty: str = "easy"
    scenario: int = 1
    agent_type: str = "a5"
    n_agents: int = 3
    episodes: int = 100
    max_steps: int = 300
    seed: int = 0

    alpha: float = 0.1
    beta: float = 0.1
    lambda_stay: float = 0.5
    gamma: float = 0.99
    tau: float = 1e-3
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    batch_size: int = 64
    replay_capacity: int = 100_000
    hidden: tuple[int, int] = (128, 128)

    obs_radius: int = 2
    p_toggle: float = 0.02
    time_increment: float = 0.01
    duration_cap: float | None = None
    j_threshold: float = 0.5
    eps_start: float = 0.9
    eps_end: float = 0.05
    eps_anneal_fraction: float = 0.5

    novelty_mode: str = "time"
    persist_mental_state: bool = True
    goal_filtered_sharing: bool = False
    reward_on_known_map: bool = False
    embedding_seed: int = 0
    layout_path: str | None = None

    def __post_init__(self) -> None:
        self.hidden = tuple(self.hidden)
        self.validate()

    def validate(self) -> None:
        if self.env_size not in ENV_SIZES:
            raise ConfigurationError(f"env_size must be one of {ENV_SIZES}, got {self.env_size!r}")
        if self.difficulty not in DIFFICULTIES:
            raise ConfigurationError(f"difficulty must be one of {DIFFICULTIES}, got {self.difficulty!r}")
        if self.scenario not in SCENARIOS:
            raise ConfigurationError(f"scenario must be 1 or 2, got {self.scenario!r}")
        if self.agent_type not in AGENT_TYPES:
            raise ConfigurationError(f"agent_type must be one of {sorted(AGENT_TYPES)}, got {self.agent_type!r}")
        if self.novelty_mode not in NOVELTY_MODES:
            raise ConfigurationError(f"novelty_mode must be one of {NOVELTY_MODES}")
        if self.n_agents < 1 or self.episodes < 1 or self.max_steps < 1:
            raise ConfigurationError("n_agents, episodes and max_steps must be positive")
        if self.scenario == 2 and self.n_agents < 3:
            raise ConfigurationError("scenario 2 needs at least 3 agents")
        for name in ("alpha", "beta", "gamma", "tau", "p_toggle", "j_threshold", "eps_start", "eps_end"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1], got {value}")
        if not 0.0 < self.lambda_stay < 1.0:
            raise ConfigurationError("lambda_stay must lie in (0, 1)")
        if self.obs_radius < 1:
            raise ConfigurationError("obs_radius must be >= 1")
        if self.time_increment < 0:
            raise ConfigurationError("time_increment must be non-negative")

    @property
    def flags(self) -> AgentTypeFlags:
        return AGENT_TYPES[self.agent_type]

    @property
    def effective_alpha(self) -> float:
        return self.alpha if self.flags.intrinsic_reward else 0.0

    def replace(self, **changes: Any) -> ScenarioConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        out["hidden"] = list(self.hidden)
        return out


_FIELD_NAMES = {f.name for f in dataclasses.fields(ScenarioConfig)}


def load_config_file(path: str | Path) -> dict[str, Any]:
    """Read a YAML (or JSON) mapping of ScenarioConfig overrides."""
    try:
        data = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"config file {path} must contain a mapping")
    data = {str(k).replace("-", "_"): v for k, v in data.items()}
    unknown = set(data) - _FIELD_NAMES
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    return data


@dataclass
class MatrixSpec:
    env_sizes: tuple[str, ...] = ENV_SIZES
    difficulties: tuple[str, ...] = DIFFICULTIES
    scenarios: tuple[int, ...] = SCENARIOS
    agent_types: tuple[str, ...] = tuple(AGENT_TYPES)
    seeds: tuple[int, ...] = (0,)
    base: ScenarioConfig = field(default_factory=ScenarioConfig)

    def configs(self) -> list[ScenarioConfig]:
        return [
            self.base.replace(env_size=e, difficulty=d, scenario=s, agent_type=a, seed=seed)
            for e in self.env_sizes
            for d in self.difficulties
            for s in self.scenarios
            for a in self.agent_types
            for seed in self.seeds
        ]

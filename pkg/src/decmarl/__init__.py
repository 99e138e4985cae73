"""Decentralized multi-agent RL with time-aware mental states and goal-aware knowledge sharing."""

from .config import AGENT_TYPES, AgentTypeFlags, ConfigurationError, ScenarioConfig

__version__ = "0.1.0"

__all__ = ["AGENT_TYPES", "AgentTypeFlags", "ConfigurationError", "ScenarioConfig", "__version__"]

"""Sewer-pipe degradation simulator and maintenance-policy toolkit."""

__version__ = "0.1.0"

from .env import Action, EnvConfig, PipeEnv, PipeState, RewardBreakdown, default_config
from .errors import (
    ConfigError,
    DomainError,
    FormatError,
    IntegrationError,
    InvalidStateError,
    PipeMdpError,
    ShapeError,
    SingularityError,
)
from .evaluate import EpisodeLog, PolicyStats, compare, evaluate, run_episode
from .hazards import Family, HazardSpec, HazardTable, builtin_cmw_tables, eval_hazard
from .msdm import (
    DegradationModel,
    OccupancyCurve,
    assemble_Q,
    interval_transition_matrix,
    solve_occupancy,
)
from .policies import (
    CBMPolicy,
    NeuralPolicy,
    NeuralPolicyWeights,
    Policy,
    RMPolicy,
    SchMPolicy,
    load_policy_weights,
    save_policy_weights,
)

__all__ = [
    "Action",
    "CBMPolicy",
    "ConfigError",
    "DegradationModel",
    "DomainError",
    "EnvConfig",
    "EpisodeLog",
    "Family",
    "FormatError",
    "HazardSpec",
    "HazardTable",
    "IntegrationError",
    "InvalidStateError",
    "NeuralPolicy",
    "NeuralPolicyWeights",
    "OccupancyCurve",
    "PipeEnv",
    "PipeMdpError",
    "PipeState",
    "Policy",
    "PolicyStats",
    "RMPolicy",
    "RewardBreakdown",
    "SchMPolicy",
    "ShapeError",
    "SingularityError",
    "assemble_Q",
    "builtin_cmw_tables",
    "compare",
    "default_config",
    "eval_hazard",
    "evaluate",
    "interval_transition_matrix",
    "load_policy_weights",
    "run_episode",
    "save_policy_weights",
    "solve_occupancy",
]

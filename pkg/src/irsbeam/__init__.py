"""Joint transmit beamforming and IRS phase optimization for QoS problems."""
from .alt_opt import AlgorithmOptions, Scenario, SolveReport, solve, solve_maxmin, solve_power_control
from .channel_model import (BeamformingSet, ChannelModelParams, ChannelSet, LinkStats, PhaseProfile, SystemConfig,
                            generate_channels)
from .errors import ConfigError, InfeasibleTargets, IrsBeamError, RandomizationFailed, SolverFailure
from .phase_opt import PhaseConstraints
from .sinr_metrics import evaluate

__version__ = "0.1.0"

__all__ = [
    "AlgorithmOptions", "BeamformingSet", "ChannelModelParams", "ChannelSet", "ConfigError", "InfeasibleTargets",
    "IrsBeamError", "LinkStats", "PhaseConstraints", "PhaseProfile", "RandomizationFailed", "Scenario",
    "SolveReport", "SolverFailure", "SystemConfig", "evaluate", "generate_channels", "solve", "solve_maxmin",
    "solve_power_control",
]

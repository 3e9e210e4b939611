"""Simulation and deep RL toolkit for RIS-assisted UAV networks with wireless power transfer."""
from .channel import ChannelSet, PathLossParams, RisGeometry, Vec3
from .env import Action, EnvState, NetworkConfig, RisUavEnv, StepOutcome

__version__ = "0.1.0"

__all__ = [
    "Action",
    "ChannelSet",
    "EnvState",
    "NetworkConfig",
    "PathLossParams",
    "RisGeometry",
    "RisUavEnv",
    "StepOutcome",
    "Vec3",
]

"""Optimal scheduling of correlated IoT status-update devices."""

from .backend import BACKEND
from .model import (
    ChannelModel,
    ConfigError,
    DeviceKind,
    DeviceSpec,
    State,
    SystemConfig,
    enumerate_actions,
    enumerate_states,
)
from .solver import NonConvergence, relative_value_iteration

__all__ = [
    "BACKEND",
    "ChannelModel",
    "ConfigError",
    "DeviceKind",
    "DeviceSpec",
    "NonConvergence",
    "State",
    "SystemConfig",
    "enumerate_actions",
    "enumerate_states",
    "relative_value_iteration",
]

__version__ = "0.1.0"

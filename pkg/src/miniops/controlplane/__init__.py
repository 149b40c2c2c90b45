"""Fleet registry and configuration-at-scale service."""

from .registry import (
    ControlPlane,
    ControlPlaneError,
    ExecutionLog,
    ServerDescriptor,
    TargetSelector,
    TaskTemplate,
)

__all__ = [
    "ControlPlane",
    "ControlPlaneError",
    "ExecutionLog",
    "ServerDescriptor",
    "TargetSelector",
    "TaskTemplate",
]

"""Per-server collection agent: scheduled tasks, local spool, retrying delivery."""

from .scheduler import TaskScheduler, VersionedTaskSet, jitter_offset_ms
from .spool import SpoolBuffer
from .tasks import CollectionTask, TaskResult, run_task
from .transport import BackoffPolicy, Flusher, IngesterClient, TransportError

__all__ = [
    "BackoffPolicy",
    "CollectionTask",
    "Flusher",
    "IngesterClient",
    "SpoolBuffer",
    "TaskResult",
    "TaskScheduler",
    "TransportError",
    "VersionedTaskSet",
    "jitter_offset_ms",
    "run_task",
]

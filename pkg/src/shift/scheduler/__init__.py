from shift.scheduler.plan import DATASIM, INFERENCE, PROXY, Task, TaskPlan, partition_for_balance
from shift.scheduler.runtime import (
    ACCELERATOR,
    CPU_POOL,
    Device,
    DeviceConfig,
    ExecutionHandle,
    LedgerEntry,
    Scheduler,
)

__all__ = [
    "ACCELERATOR",
    "CPU_POOL",
    "DATASIM",
    "INFERENCE",
    "PROXY",
    "Device",
    "DeviceConfig",
    "ExecutionHandle",
    "LedgerEntry",
    "Scheduler",
    "Task",
    "TaskPlan",
    "partition_for_balance",
]

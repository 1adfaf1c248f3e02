"""Device-aware FIFO scheduler with a threaded runtime and a simulator."""

from __future__ import annotations

import heapq
import logging
import os
import threading
import time
from collections import deque
from dataclasses import dataclass, field

from shift.errors import MissingCost, TaskFailed
from shift.scheduler.plan import INFERENCE, PROXY, TaskPlan

log = logging.getLogger(__name__)

ACCELERATOR = "accelerator"
CPU_POOL = "cpu_pool"

PENDING, READY, RUNNING, DONE, FAILED = "pending", "ready", "running", "done", "failed"


@dataclass(frozen=True)
class Device:
    device_id: str
    cls: str
    speed: float = 1.0


@dataclass
class DeviceConfig:
    """Device layout.

    ``proxy_placement="shared"`` queues proxy tasks with inference tasks on
    the accelerators, which makes a serialized plan follow the cost model's
    single-queue accounting exactly.
    """

    accelerators: int = 0
    accelerator_speeds: list | None = None
    cpu_threads: int | None = None
    proxy_placement: str = "cpu"

    def devices(self) -> list[Device]:
        speeds = self.accelerator_speeds or [1.0] * self.accelerators
        if len(speeds) != self.accelerators:
            raise ValueError("need one speed factor per accelerator")
        cpu = self.cpu_threads if self.cpu_threads is not None else max(1, (os.cpu_count() or 2) - 1)
        out = [Device(f"acc{i}", ACCELERATOR, float(s)) for i, s in enumerate(speeds)]
        out += [Device(f"cpu{i}", CPU_POOL) for i in range(max(1, cpu))]
        return out


@dataclass
class LedgerEntry:
    task_id: str
    device_id: str
    start: float
    stop: float


@dataclass
class ExecutionHandle:
    plan: TaskPlan
    status: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    ledger: list = field(default_factory=list)
    busy: dict = field(default_factory=dict)
    makespan: float = 0.0
    _done: threading.Event = field(default_factory=threading.Event, repr=False)

    def wait(self, timeout: float | None = None) -> bool:
        return self._done.wait(timeout)

    @property
    def failed(self) -> dict:
        return {t: e for t, e in self.errors.items()}

    def raise_for_failures(self) -> None:
        if self.errors:
            raise TaskFailed(self.errors)


class Scheduler:
    """FIFO queues per device class; a task is ready once its dependencies are done."""

    def __init__(self, config: DeviceConfig | None = None):
        self.config = config or DeviceConfig(cpu_threads=1)
        self.devices = self.config.devices()
        self.has_accelerators = any(d.cls == ACCELERATOR for d in self.devices)

    def device_class(self, task) -> str:
        if task.kind == INFERENCE:
            return ACCELERATOR if self.has_accelerators else CPU_POOL
        if task.kind == PROXY and self.config.proxy_placement == "shared" and self.has_accelerators:
            return ACCELERATOR
        return CPU_POOL

    # -- real mode --------------------------------------------------------

    def submit(self, plan: TaskPlan) -> ExecutionHandle:
        plan.validate()
        handle = ExecutionHandle(plan)
        handle.status = {tid: PENDING for tid in plan.tasks}
        handle.busy = {d.device_id: 0.0 for d in self.devices}
        if not plan.tasks:
            handle._done.set()
            return handle
        cond = threading.Condition()
        queues = {ACCELERATOR: deque(), CPU_POOL: deque()}
        remaining = {tid: len(t.deps) for tid, t in plan.tasks.items()}
        dependents = plan.dependents()
        outstanding = [len(plan.tasks)]
        t0 = time.perf_counter()

        def make_ready(tid):
            handle.status[tid] = READY
            queues[self.device_class(plan.tasks[tid])].append(tid)

        def fail_subtree(tid, reason):
            stack = list(dependents[tid])
            while stack:
                dep = stack.pop()
                if handle.status[dep] in (PENDING, READY):
                    handle.status[dep] = FAILED
                    handle.errors[dep] = f"dependency {tid} failed: {reason}"
                    outstanding[0] -= 1
                    stack.extend(dependents[dep])

        for tid, n in remaining.items():
            if n == 0:
                make_ready(tid)

        def worker(device: Device):
            queue = queues[device.cls]
            while True:
                with cond:
                    while not queue and outstanding[0] > 0:
                        cond.wait()
                    if outstanding[0] <= 0:
                        return
                    tid = queue.popleft()
                    handle.status[tid] = RUNNING
                task = plan.tasks[tid]
                start = time.perf_counter() - t0
                try:
                    result = task.fn() if task.fn is not None else None
                    error = None
                except Exception as exc:  # task failures are reported, not raised
                    log.warning("task %s failed: %s", tid, exc)
                    result, error = None, f"{type(exc).__name__}: {exc}"
                stop = time.perf_counter() - t0
                with cond:
                    handle.ledger.append(LedgerEntry(tid, device.device_id, start, stop))
                    handle.busy[device.device_id] += stop - start
                    outstanding[0] -= 1
                    if error is None:
                        handle.status[tid] = DONE
                        handle.results[tid] = result
                        for dep in dependents[tid]:
                            remaining[dep] -= 1
                            if remaining[dep] == 0 and handle.status[dep] == PENDING:
                                make_ready(dep)
                    else:
                        handle.status[tid] = FAILED
                        handle.errors[tid] = error
                        fail_subtree(tid, error)
                    if outstanding[0] <= 0:
                        handle.makespan = stop
                        handle._done.set()
                    cond.notify_all()

        classes_needed = {self.device_class(t) for t in plan.tasks.values()}
        for device in self.devices:
            if device.cls in classes_needed:
                threading.Thread(target=worker, args=(device,), daemon=True, name=f"shift-{device.device_id}").start()
        return handle

    def run(self, plan: TaskPlan) -> ExecutionHandle:
        handle = self.submit(plan)
        handle.wait()
        return handle

    # -- simulated mode ---------------------------------------------------

    def simulate(self, plan: TaskPlan) -> ExecutionHandle:
        """Discrete-event run of the same FIFO policy using task ``cost`` (ms)."""
        plan.validate()
        for t in plan.tasks.values():
            if t.cost is None:
                raise MissingCost(f"task {t.task_id} has no cost annotation")
        handle = ExecutionHandle(plan)
        handle.status = {tid: PENDING for tid in plan.tasks}
        handle.busy = {d.device_id: 0.0 for d in self.devices}
        order = {tid: i for i, tid in enumerate(plan.tasks)}
        remaining = {tid: len(t.deps) for tid, t in plan.tasks.items()}
        dependents = plan.dependents()
        queues = {ACCELERATOR: deque(), CPU_POOL: deque()}
        free = {d.device_id: True for d in self.devices}
        events: list = []  # (time, device index, task id)
        now = 0.0

        def release(tids):
            for tid in sorted(tids, key=order.get):
                handle.status[tid] = READY
                queues[self.device_class(plan.tasks[tid])].append(tid)

        release([tid for tid, n in remaining.items() if n == 0])
        finished = 0
        while finished < len(plan.tasks):
            for idx, device in enumerate(self.devices):
                queue = queues[device.cls]
                if free[device.device_id] and queue:
                    tid = queue.popleft()
                    duration = plan.tasks[tid].cost / device.speed
                    free[device.device_id] = False
                    handle.status[tid] = RUNNING
                    handle.ledger.append(LedgerEntry(tid, device.device_id, now, now + duration))
                    handle.busy[device.device_id] += duration
                    heapq.heappush(events, (now + duration, idx, tid))
            if not events:
                break
            now = events[0][0]
            newly = []
            while events and events[0][0] == now:
                _, idx, tid = heapq.heappop(events)
                free[self.devices[idx].device_id] = True
                handle.status[tid] = DONE
                finished += 1
                for dep in dependents[tid]:
                    remaining[dep] -= 1
                    if remaining[dep] == 0:
                        newly.append(dep)
            release(newly)
        handle.makespan = now
        handle._done.set()
        return handle

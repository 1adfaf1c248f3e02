"""Task plans: a DAG of inference, proxy and dataset-similarity tasks."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Callable

from shift.errors import CyclicPlan

INFERENCE = "inference"
PROXY = "proxy"
DATASIM = "datasim"
TASK_KINDS = (INFERENCE, PROXY, DATASIM)


@dataclass
class Task:
    """One schedulable unit of work.

    ``fn`` runs the work in real mode; ``cost`` (ms) is used by the
    simulator. ``meta`` carries identification such as model and reader.
    """

    task_id: str
    kind: str
    deps: tuple = ()
    fn: Callable[[], Any] | None = None
    cost: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ValueError(f"unknown task kind {self.kind!r}")
        self.deps = tuple(self.deps)


@dataclass
class TaskPlan:
    tasks: dict = field(default_factory=dict)
    modes: dict = field(default_factory=dict)
    cache_hits: Counter = field(default_factory=Counter)

    def add(self, task: Task) -> Task:
        if task.task_id in self.tasks:
            raise ValueError(f"duplicate task id {task.task_id}")
        self.tasks[task.task_id] = task
        return task

    def __len__(self) -> int:
        return len(self.tasks)

    def __iter__(self):
        return iter(self.tasks.values())

    def counts(self) -> dict:
        c = Counter(t.kind for t in self.tasks.values())
        return {k: c.get(k, 0) for k in TASK_KINDS}

    def dependents(self) -> dict:
        out = {tid: [] for tid in self.tasks}
        for t in self.tasks.values():
            for d in t.deps:
                out[d].append(t.task_id)
        return out

    def validate(self) -> None:
        """Raise :class:`CyclicPlan` on unknown dependencies or cycles."""
        for t in self.tasks.values():
            for d in t.deps:
                if d not in self.tasks:
                    raise CyclicPlan(f"task {t.task_id} depends on unknown task {d}")
        state: dict = {}
        for root in self.tasks:
            if root in state:
                continue
            stack = [(root, iter(self.tasks[root].deps))]
            state[root] = 1
            while stack:
                node, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    state[node] = 2
                    stack.pop()
                elif state.get(nxt) == 1:
                    raise CyclicPlan(f"cycle through task {nxt}")
                elif nxt not in state:
                    state[nxt] = 1
                    stack.append((nxt, iter(self.tasks[nxt].deps)))

    def merge(self, other: "TaskPlan") -> None:
        for t in other.tasks.values():
            self.add(t)
        self.modes.update(other.modes)
        self.cache_hits.update(other.cache_hits)


def partition_for_balance(n, n_devices: int, threshold: int = 1024) -> list[tuple[int, int]]:
    """Near-equal ``[start, stop)`` partitions, one per device for large readers."""
    if n_devices < 1:
        raise ValueError("n_devices must be >= 1")
    n = n if isinstance(n, int) else len(n)
    parts = n_devices if n >= threshold else 1
    base, extra = divmod(n, parts)
    out, start = [], 0
    for i in range(parts):
        stop = start + base + (1 if i < extra else 0)
        out.append((start, stop))
        start = stop
    return out

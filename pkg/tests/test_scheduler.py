import threading
import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shift.errors import CyclicPlan, MissingCost, TaskFailed
from shift.scheduler import (
    ACCELERATOR,
    CPU_POOL,
    DATASIM,
    INFERENCE,
    PROXY,
    DeviceConfig,
    Scheduler,
    Task,
    TaskPlan,
    partition_for_balance,
)


def _plan(*tasks):
    plan = TaskPlan()
    for t in tasks:
        plan.add(t)
    return plan


def _covered(intervals, lo, hi, eps=1e-9):
    """True when the union of ``intervals`` covers ``[lo, hi)``."""
    t = lo
    for a, b in sorted(intervals):
        if a > t + eps:
            break
        t = max(t, b)
    return t >= hi - eps


def check_ledger(handle, scheduler, conservation=True):
    stops = {e.task_id: e.stop for e in handle.ledger}
    starts = {e.task_id: e.start for e in handle.ledger}
    by_device = {}
    for e in handle.ledger:
        by_device.setdefault(e.device_id, []).append((e.start, e.stop))
    for tid, task in handle.plan.tasks.items():
        for dep in task.deps:
            assert starts[tid] >= stops[dep] - 1e-9
    for spans in by_device.values():
        spans.sort()
        for (a0, a1), (b0, b1) in zip(spans, spans[1:]):
            assert b0 >= a1 - 1e-9
    if not conservation:
        return
    # work conservation: while a ready task waits, every device of its class is busy
    for tid, task in handle.plan.tasks.items():
        ready = max((stops[d] for d in task.deps), default=0.0)
        cls = scheduler.device_class(task)
        for dev in scheduler.devices:
            if dev.cls == cls and starts[tid] > ready + 1e-9:
                assert _covered(by_device.get(dev.device_id, []), ready, starts[tid])


class TestPartition:
    def test_large_reader(self):
        parts = partition_for_balance(80000, 8)
        assert [b - a for a, b in parts] == [10000] * 8

    def test_below_threshold(self):
        assert partition_for_balance(500, 8) == [(0, 500)]

    def test_balanced_split(self):
        sizes = [b - a for a, b in partition_for_balance(8001, 8)]
        assert sizes == [1001] + [1000] * 7

    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 100_000), st.integers(1, 16), st.integers(1, 5000))
    def test_properties(self, n, p, threshold):
        parts = partition_for_balance(n, p, threshold)
        assert len(parts) == (p if n >= threshold else 1)
        assert parts[0][0] == 0 and parts[-1][1] == n
        sizes = [b - a for a, b in parts]
        assert max(sizes) - min(sizes) <= 1


class TestPlan:
    def test_cycle_detected(self):
        plan = _plan(Task("a", PROXY, ("b",)), Task("b", PROXY, ("a",)))
        with pytest.raises(CyclicPlan):
            plan.validate()

    def test_unknown_dependency(self):
        with pytest.raises(CyclicPlan):
            _plan(Task("a", PROXY, ("ghost",))).validate()

    def test_duplicate_id(self):
        with pytest.raises(ValueError):
            _plan(Task("a", PROXY), Task("a", PROXY))

    def test_counts(self):
        plan = _plan(Task("i", INFERENCE), Task("p", PROXY, ("i",)), Task("d", DATASIM))
        assert plan.counts() == {INFERENCE: 1, PROXY: 1, DATASIM: 1}


class TestSimulation:
    def test_single_task(self):
        h = Scheduler(DeviceConfig(accelerators=1, cpu_threads=1)).simulate(_plan(Task("a", INFERENCE, cost=5.0)))
        assert h.makespan == 5.0

    def test_fifo_on_one_accelerator(self):
        plan = _plan(*(Task(f"i{k}", INFERENCE, cost=1.0 + k) for k in range(3)))
        h = Scheduler(DeviceConfig(accelerators=1, cpu_threads=1)).simulate(plan)
        assert [e.task_id for e in sorted(h.ledger, key=lambda e: e.start)] == ["i0", "i1", "i2"]
        assert h.makespan == 6.0

    def test_eight_accelerators_run_concurrently(self):
        plan = _plan(*(Task(f"i{k}", INFERENCE, cost=5.0 + k) for k in range(8)))
        h = Scheduler(DeviceConfig(accelerators=8, cpu_threads=1)).simulate(plan)
        assert h.makespan == 12.0
        assert all(e.start == 0.0 for e in h.ledger)

    def test_proxy_waits_for_dependencies(self):
        plan = _plan(Task("tr", INFERENCE, cost=3.0), Task("te", INFERENCE, cost=4.0),
                     Task("p", PROXY, ("tr", "te"), cost=2.0))
        h = Scheduler(DeviceConfig(accelerators=1, cpu_threads=1)).simulate(plan)
        start = {e.task_id: e.start for e in h.ledger}
        assert start["p"] == 7.0 and h.makespan == 9.0

    def test_device_classes(self):
        s = Scheduler(DeviceConfig(accelerators=2, cpu_threads=1))
        assert s.device_class(Task("i", INFERENCE)) == ACCELERATOR
        assert s.device_class(Task("p", PROXY)) == CPU_POOL
        assert s.device_class(Task("d", DATASIM)) == CPU_POOL
        assert Scheduler(DeviceConfig(cpu_threads=1)).device_class(Task("i", INFERENCE)) == CPU_POOL
        shared = Scheduler(DeviceConfig(accelerators=1, cpu_threads=1, proxy_placement="shared"))
        assert shared.device_class(Task("p", PROXY)) == ACCELERATOR

    def test_speed_factor(self):
        h = Scheduler(DeviceConfig(accelerators=1, accelerator_speeds=[2.0], cpu_threads=1)).simulate(
            _plan(Task("a", INFERENCE, cost=10.0)))
        assert h.makespan == 5.0

    def test_missing_cost(self):
        with pytest.raises(MissingCost):
            Scheduler().simulate(_plan(Task("a", INFERENCE)))

    def test_deterministic(self):
        plan = _plan(*(Task(f"i{k}", INFERENCE, cost=float(k % 3 + 1)) for k in range(10)))
        s = Scheduler(DeviceConfig(accelerators=3, cpu_threads=2))
        a = [(e.task_id, e.device_id, e.start) for e in s.simulate(plan).ledger]
        b = [(e.task_id, e.device_id, e.start) for e in s.simulate(plan).ledger]
        assert a == b

    @settings(max_examples=60, deadline=None)
    @given(st.data())
    def test_random_dags(self, data):
        n = data.draw(st.integers(1, 25))
        plan = TaskPlan()
        for i in range(n):
            deps = data.draw(st.lists(st.integers(0, i - 1), max_size=3, unique=True)) if i else []
            kind = data.draw(st.sampled_from([INFERENCE, PROXY, DATASIM]))
            cost = data.draw(st.integers(1, 20))
            plan.add(Task(f"t{i}", kind, tuple(f"t{d}" for d in deps), cost=float(cost)))
        acc = data.draw(st.integers(0, 4))
        cpu = data.draw(st.integers(1, 3))
        placement = data.draw(st.sampled_from(["cpu", "shared"]))
        s = Scheduler(DeviceConfig(accelerators=acc, cpu_threads=cpu, proxy_placement=placement))
        h = s.simulate(plan)
        assert len(h.ledger) == n
        check_ledger(h, s)
        total = sum(t.cost for t in plan)
        assert h.makespan <= total + 1e-9
        assert h.makespan >= max(t.cost for t in plan) - 1e-9


class TestThreaded:
    def test_results_and_order(self):
        seen = []
        lock = threading.Lock()

        def job(name):
            def run():
                with lock:
                    seen.append(name)
                return name.upper()
            return run

        plan = _plan(Task("a", INFERENCE, fn=job("a")), Task("b", INFERENCE, fn=job("b")),
                     Task("p", PROXY, ("a", "b"), fn=job("p")))
        h = Scheduler(DeviceConfig(accelerators=1, cpu_threads=2)).run(plan)
        assert h.results == {"a": "A", "b": "B", "p": "P"}
        assert seen == ["a", "b", "p"]
        check_ledger(h, Scheduler(DeviceConfig(accelerators=1, cpu_threads=2)), conservation=False)

    def test_failure_fails_only_dependents(self):
        def boom():
            raise RuntimeError("bad chunk")

        plan = _plan(Task("bad", INFERENCE, fn=boom), Task("good", INFERENCE, fn=lambda: 1),
                     Task("p1", PROXY, ("bad", "good"), fn=lambda: 2), Task("p2", PROXY, ("good",), fn=lambda: 3),
                     Task("p3", PROXY, ("p1",), fn=lambda: 4))
        h = Scheduler(DeviceConfig(cpu_threads=2)).run(plan)
        assert h.status == {"bad": "failed", "good": "done", "p1": "failed", "p2": "done", "p3": "failed"}
        assert h.results["p2"] == 3
        assert "bad chunk" in h.errors["p1"]
        with pytest.raises(TaskFailed):
            h.raise_for_failures()

    def test_concurrent_devices(self):
        barrier = threading.Barrier(3, timeout=5)
        plan = _plan(*(Task(f"i{k}", INFERENCE, fn=barrier.wait) for k in range(3)))
        h = Scheduler(DeviceConfig(accelerators=3, cpu_threads=1)).run(plan)
        assert not h.errors

    def test_empty_plan(self):
        h = Scheduler().submit(TaskPlan())
        assert h.wait(1.0)

    def test_dependency_gate(self):
        gate = threading.Event()
        plan = _plan(Task("slow", INFERENCE, fn=lambda: gate.wait(5)), Task("p", PROXY, ("slow",), fn=lambda: 1))
        h = Scheduler(DeviceConfig(cpu_threads=2)).submit(plan)
        time.sleep(0.05)
        assert h.status["p"] == "pending"
        gate.set()
        assert h.wait(5)
        assert h.status["p"] == "done"

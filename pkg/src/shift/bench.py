"""Leave-one-dataset-out benchmarking of search strategies.

Fine-tuning is out of scope, so the expected accuracies in the regret
definition collapse to the recorded BenchmarkResults point values.
"""

from __future__ import annotations

import csv
import random
import statistics
from dataclasses import asdict, dataclass, field
from pathlib import Path

from shift.catalog import holdout
from shift.errors import MissingAccuracy

CSV_COLUMNS = (
    "strategy", "target", "budget", "returned", "best_overall", "best_in_set", "regret",
    "search_time_ms", "fine_tune_time_ms",
)


@dataclass
class RegretReport:
    strategy: str
    target: str
    budget: int
    returned: list
    best_overall: float
    best_in_set: float
    regret: float
    search_time_ms: float = 0.0
    fine_tune_time_ms: float = 0.0

    def to_row(self) -> dict:
        row = asdict(self)
        row["returned"] = " ".join(self.returned)
        return row

    @property
    def total_time_ms(self) -> float:
        return self.search_time_ms + self.fine_tune_time_ms


@dataclass
class BaselineStats:
    B: int
    regrets: list = field(default_factory=list)

    @property
    def min(self) -> float:
        return min(self.regrets)

    @property
    def mean(self) -> float:
        return statistics.fmean(self.regrets)

    @property
    def max(self) -> float:
        return max(self.regrets)


def simulate_holdout(catalog, target: str):
    """Scope in which ``target``'s fine-tune results are hidden (see :func:`holdout`)."""
    return holdout(catalog, target)


def target_accuracies(catalog, target: str, pool=None) -> dict:
    """Recorded accuracy of every pool model on ``target``.

    Raises:
        MissingAccuracy: a pool model has no recorded result for ``target``.
    """
    store = catalog.store
    recorded = {r.model_id: r for r in store.benchmark_results() if r.reader_id == target}
    pool = [m.model_id for m in store.models()] if pool is None else list(pool)
    missing = [m for m in pool if m not in recorded]
    if missing:
        raise MissingAccuracy(f"no recorded accuracy on {target!r} for {', '.join(missing)}")
    return {m: recorded[m].accuracy for m in pool}


def regret(accuracies: dict, returned) -> tuple[float, float, float]:
    """``(best_overall, best_in_set, regret)`` for a returned model set."""
    if not accuracies:
        raise MissingAccuracy("empty pool")
    best_overall = max(accuracies.values())
    picked = [accuracies[m] for m in returned if m in accuracies]
    unknown = [m for m in returned if m not in accuracies]
    if unknown:
        raise MissingAccuracy(f"returned models without a recorded accuracy: {', '.join(unknown)}")
    best_in_set = max(picked) if picked else float("-inf")
    return best_overall, best_in_set, best_overall - best_in_set


def default_bindings(catalog, target: str) -> dict:
    """Bind ``TestReader``/``TrainReader`` to ``<target>-test``/``<target>-train`` when registered.

    Falls back to the target reader itself for a name without a split.
    """
    out = {}
    for name, suffix in (("TestReader", "-test"), ("TrainReader", "-train")):
        rid = f"{target}{suffix}"
        out[name] = rid if catalog.has_reader(rid) else target
    return out


def evaluate_strategy(engine, query, target: str, budget: int, *, strategy: str | None = None,
                      pool=None, bindings: dict | None = None, **overrides) -> RegretReport:
    """Run ``query`` with ``target``'s results hidden and score its top ``budget`` models."""
    accuracies = target_accuracies(engine.catalog, target, pool)
    scope = simulate_holdout(engine.catalog, target)
    binds = {**default_bindings(engine.catalog, target), **(bindings or {})}
    result = engine.execute(query, catalog=scope, bindings=binds, persist=False, **overrides)
    returned = list(result.ranking[:budget])
    best_overall, best_in_set, gap = regret(accuracies, returned)
    store = engine.catalog.store
    fine_tune = 0.0
    for m in returned:
        rec = store.benchmark_result(m, target)
        if rec is not None and rec.wall_time is not None:
            fine_tune += rec.wall_time
    name = strategy or (query if isinstance(query, str) else "query").strip().splitlines()[0][:60]
    return RegretReport(name, target, budget, returned, best_overall, best_in_set, gap,
                        result.report["wall_time_ms"], fine_tune)


def random_baseline(pool: dict, B: int, trials: int = 50, seed: int = 0) -> BaselineStats:
    """Regret of ``B`` models sampled uniformly without replacement, over ``trials`` draws.

    Args:
        pool: ``{model_id: accuracy}`` on the target.
    """
    if not 1 <= B <= len(pool):
        raise ValueError(f"B must lie in [1, {len(pool)}]")
    rng = random.Random(seed)
    ids = sorted(pool)
    stats = BaselineStats(B)
    for _ in range(trials):
        picked = rng.sample(ids, B)
        stats.regrets.append(regret(pool, picked)[2])
    return stats


def write_csv(reports, path) -> None:
    """Write one row per report with the fixed :data:`CSV_COLUMNS`."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for rep in reports:
            writer.writerow(rep.to_row())


def time_accuracy_rows(reports) -> list[tuple[str, float, float]]:
    """``(strategy, time_ms, accuracy)`` rows for time-vs-accuracy plots."""
    return [(r.strategy, r.total_time_ms, r.best_in_set) for r in reports]

"""Incremental re-execution over mutable readers.

Re-running a query on a reader with new deltas is a fresh execution whose
work is pruned by the content-addressed caches: unchanged feature chunks and
unchanged proxy inputs are hits, so only changed rows are re-extracted and
only proxies whose inputs moved are recomputed. For successive halving this
replays every round from the earliest one whose consumed prefix changed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from shift.errors import StaleCache
from shift.readers import AddPlan, Delta, MutableReader, distribute_added_samples, uniform_sizes

log = logging.getLogger(__name__)


def derived_reader_id(reader_id: str, delta: Delta) -> str:
    return f"{reader_id}@{delta.content_hash()[:12]}"


def apply_deltas(catalog, deltas: dict, bindings: dict | None = None) -> dict:
    """Register a derived reader per ``{name: delta}`` and return new bindings.

    Names are resolved through ``bindings`` first. Re-applying the same delta
    reuses the already registered derived reader.
    """
    out = dict(bindings or {})
    for name, delta in deltas.items():
        parent = out.get(name, name)
        new_id = derived_reader_id(parent, delta)
        if not catalog.has_reader(new_id):
            record = catalog.reader_record(parent)
            n_classes = max(record.label_cardinality, int(delta.payload.y.max()) + 1 if len(delta.payload) else 0)
            catalog.derive_reader(new_id, parent, delta, modality=record.modality, type_tag=record.type_tag,
                                  n_classes=n_classes)
        out[name] = new_id
    return out


def check_prior(engine, prior) -> dict:
    """Return the prior execution record or raise :class:`StaleCache`.

    The record is stale when it is unknown or when feature chunks it used
    are no longer in the feature cache.
    """
    prior_id = getattr(prior, "execution_id", prior)
    record = engine.catalog.store.get_execution(prior_id)
    if record is None:
        raise StaleCache(f"no recorded execution {prior_id!r}")
    missing = [k for k in record.get("features", []) if tuple(k) not in engine.feature_cache]
    if missing:
        raise StaleCache(f"{len(missing)} feature chunks of execution {prior_id} are no longer cached")
    return record


def incremental_execute(engine, query, prior, deltas: dict | None = None, *, bindings: dict | None = None,
                        **overrides):
    """Re-execute ``query`` after applying reader ``deltas`` on top of ``prior``.

    ``prior`` is an execution id or result. When its caches are gone the run
    silently degrades to a full execution and says so in the report.
    """
    warning = None
    try:
        record = check_prior(engine, prior)
        base_bindings = {**record.get("bindings", {}), **(bindings or {})}
    except StaleCache as exc:
        warning = f"stale prior execution, running in full: {exc}"
        log.warning(warning)
        base_bindings = dict(bindings or {})
    new_bindings = apply_deltas(engine.catalog, deltas or {}, base_bindings)
    result = engine.execute(query, bindings=new_bindings, **overrides)
    result.report["incremental"] = {
        "prior": getattr(prior, "execution_id", prior),
        "bindings": new_bindings,
        "full_fallback": warning is not None,
    }
    if warning:
        result.report["warnings"].append(warning)
    return result


@dataclass
class AddReaderUpdate:
    """Outcome of spreading appended samples over an SH bucket layout."""

    reader: MutableReader
    plan: AddPlan | None
    bucket_sizes: list
    affected_rounds: list = field(default_factory=list)

    @property
    def is_noop(self) -> bool:
        return self.plan is None


def apply_add_reader_sh(state, reader: MutableReader, X, y, seed: int, chunk_size: int) -> AddReaderUpdate:
    """Distribute new samples uniformly over every bucket of a prior SH run.

    All buckets grow, including ones consumed only by eliminated models, so
    every round whose prefix contains a grown bucket must be re-evaluated;
    the caches limit extraction to the inserted rows.
    """
    n_buckets = len(state.bucket_sizes)
    if len(y) == 0:
        return AddReaderUpdate(reader, None, list(state.bucket_sizes), [])
    plan = distribute_added_samples(n_buckets, len(y), seed, chunk_size=chunk_size)
    grown = reader.with_delta(Delta.add(X, y, plan))
    sizes = grown.bucket_sizes(chunk_size)
    affected = [r.k for r in state.rounds if any(plan.counts[b] for b in range(r.buckets_used))]
    return AddReaderUpdate(grown, plan, sizes, affected)


def tail_append(reader: MutableReader, X, y, chunk_size: int) -> tuple[MutableReader, list]:
    """Naive strategy: append samples as new trailing buckets."""
    sizes = reader.bucket_sizes(chunk_size) + uniform_sizes(len(y), chunk_size)
    return reader.with_delta(Delta.add(X, y)), sizes

"""Embedded catalog store backed by SQLite.

A catalog directory holds::

    manifest.json       {"format": "shift-catalog", "version": 1}
    catalog.sqlite      models, readers, benchmark results, version counter
    caches.sqlite       proxy values, dataset embeddings, execution records
    readers/<id>/       base.shfr plus delta_<i>.shfr / delta_<i>.json

Registration data and derived caches live in separate files so that running
queries never changes the bytes of the registration store.
"""

from __future__ import annotations

import json
import sqlite3
import threading
from pathlib import Path

import numpy as np

from shift.catalog.records import BenchmarkResult, ModelRecord, ReaderRecord
from shift.errors import CorruptContainer, DuplicateId, InvalidField, NoResultsForTarget, UnknownId
from shift.readers import container
from shift.readers.mutable import AddPlan, Delta, MutableReader, SampleSource

MANIFEST = {"format": "shift-catalog", "version": 1}

_CATALOG_SCHEMA = """
CREATE TABLE IF NOT EXISTS meta (key TEXT PRIMARY KEY, value TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS models (model_id TEXT PRIMARY KEY, body TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS readers (reader_id TEXT PRIMARY KEY, body TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS benchmark_results (
    model_id TEXT NOT NULL, reader_id TEXT NOT NULL,
    accuracy REAL NOT NULL, wall_time REAL,
    PRIMARY KEY (model_id, reader_id));
"""

_CACHE_SCHEMA = """
CREATE TABLE IF NOT EXISTS proxy_values (key TEXT PRIMARY KEY, body TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS embeddings (key TEXT PRIMARY KEY, vector BLOB NOT NULL);
CREATE TABLE IF NOT EXISTS executions (execution_id TEXT PRIMARY KEY, body TEXT NOT NULL);
"""


def _connect(path: str) -> sqlite3.Connection:
    conn = sqlite3.connect(path, check_same_thread=False, isolation_level=None)
    return conn


class Catalog:
    """Relational store for models, readers and benchmark results.

    Args:
        root: catalog directory; ``None`` keeps everything in memory.

    One writer at a time is enforced by an internal lock; readers see a
    consistent snapshot because every read runs under the same lock.
    """

    def __init__(self, root: str | Path | None = None):
        self.root = None if root is None else Path(root)
        self._lock = threading.RLock()
        self._readers: dict[str, MutableReader] = {}
        if self.root is None:
            self._db = _connect(":memory:")
            self._cache = _connect(":memory:")
        else:
            self.root.mkdir(parents=True, exist_ok=True)
            manifest = self.root / "manifest.json"
            if manifest.exists():
                found = json.loads(manifest.read_text())
                if found.get("format") != MANIFEST["format"] or found.get("version") != MANIFEST["version"]:
                    raise CorruptContainer(f"unsupported catalog manifest {found}")
            else:
                manifest.write_text(json.dumps(MANIFEST, indent=2) + "\n")
            self._db = _connect(str(self.root / "catalog.sqlite"))
            self._cache = _connect(str(self.root / "caches.sqlite"))
        self._db.executescript(_CATALOG_SCHEMA)
        self._cache.executescript(_CACHE_SCHEMA)

    # -- housekeeping -----------------------------------------------------

    def close(self) -> None:
        with self._lock:
            self._db.close()
            self._cache.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    @property
    def store(self) -> "Catalog":
        return self

    @property
    def hidden_targets(self) -> frozenset:
        return frozenset()

    @property
    def version(self) -> int:
        with self._lock:
            row = self._db.execute("SELECT value FROM meta WHERE key = 'version'").fetchone()
        return 0 if row is None else int(row[0])

    def _bump(self) -> None:
        self._db.execute(
            "INSERT INTO meta (key, value) VALUES ('version', '1') "
            "ON CONFLICT(key) DO UPDATE SET value = CAST(value AS INTEGER) + 1"
        )

    def sql_eval(self, statement, **kwargs):
        """Evaluate a plain SQL-subset statement against this catalog."""
        from shift.catalog.sqleval import sql_eval

        return sql_eval(self, statement, **kwargs)

    # -- models -----------------------------------------------------------

    def register_model(self, record: ModelRecord) -> str:
        body = json.dumps(record.to_dict(), sort_keys=True)
        with self._lock:
            try:
                self._db.execute("BEGIN")
                self._db.execute("INSERT INTO models (model_id, body) VALUES (?, ?)", (record.model_id, body))
                self._bump()
                self._db.execute("COMMIT")
            except sqlite3.IntegrityError:
                self._db.execute("ROLLBACK")
                raise DuplicateId(f"model {record.model_id!r} already registered") from None
        return record.model_id

    def model(self, model_id: str) -> ModelRecord:
        with self._lock:
            row = self._db.execute("SELECT body FROM models WHERE model_id = ?", (model_id,)).fetchone()
        if row is None:
            raise UnknownId(f"unknown model {model_id!r}")
        return ModelRecord.from_dict(json.loads(row[0]))

    def has_model(self, model_id: str) -> bool:
        with self._lock:
            return self._db.execute("SELECT 1 FROM models WHERE model_id = ?", (model_id,)).fetchone() is not None

    def models(self) -> list[ModelRecord]:
        with self._lock:
            rows = self._db.execute("SELECT body FROM models ORDER BY model_id").fetchall()
        return [ModelRecord.from_dict(json.loads(r[0])) for r in rows]

    # -- readers ----------------------------------------------------------

    def register_reader(
        self,
        reader_id: str,
        data: MutableReader | SampleSource,
        *,
        modality: str = "Vision",
        type_tag: str = "",
        parent: str | None = None,
        n_classes: int | None = None,
    ) -> ReaderRecord:
        """Register a reader with its samples.

        A reader with deltas must name the reader it was derived from; its
        kind is taken from its last delta.
        """
        reader = data if isinstance(data, MutableReader) else MutableReader(data)
        reader = MutableReader(reader.base, reader.deltas, reader.chunk_size, reader_id)
        kind = "initial" if not reader.deltas else reader.deltas[-1].kind
        if kind != "initial" and parent is None:
            raise InvalidField("change/add readers must name their parent reader")
        if kind == "initial":
            parent = None
        _, y = reader.materialize()
        if n_classes is None:
            n_classes = int(y.max()) + 1 if len(y) else 1
        record = ReaderRecord(
            reader_id=reader_id,
            n_samples=reader.n_effective,
            label_cardinality=n_classes,
            content_hash=reader.content_hash(),
            modality=modality,
            reader_kind=kind,
            parent_reader=parent,
            type_tag=type_tag,
        )
        with self._lock:
            if self._has_reader(reader_id):
                raise DuplicateId(f"reader {reader_id!r} already registered")
            if parent is not None and not self._has_reader(parent):
                raise UnknownId(f"unknown parent reader {parent!r}")
            if self.root is not None:
                self._write_reader_files(reader_id, reader)
            self._db.execute("BEGIN")
            self._db.execute(
                "INSERT INTO readers (reader_id, body) VALUES (?, ?)",
                (reader_id, json.dumps(record.to_dict(), sort_keys=True)),
            )
            self._bump()
            self._db.execute("COMMIT")
            self._readers[reader_id] = reader
        return record

    def derive_reader(self, reader_id: str, parent: str, delta: Delta, **kwargs) -> ReaderRecord:
        base = self.reader(parent)
        return self.register_reader(reader_id, base.with_delta(delta), parent=parent, **kwargs)

    def _has_reader(self, reader_id: str) -> bool:
        return self._db.execute("SELECT 1 FROM readers WHERE reader_id = ?", (reader_id,)).fetchone() is not None

    def has_reader(self, reader_id: str) -> bool:
        with self._lock:
            return self._has_reader(reader_id)

    def _reader_dir(self, reader_id: str) -> Path:
        return self.root / "readers" / reader_id

    def _write_reader_files(self, reader_id: str, reader: MutableReader) -> None:
        d = self._reader_dir(reader_id)
        reader.base.to_file(d / "base.shfr")
        for i, delta in enumerate(reader.deltas):
            if delta.kind == "change":
                container.write_change(d / f"delta_{i}.shfr", delta.indices, delta.payload.X, delta.payload.y)
            else:
                container.write_samples(d / f"delta_{i}.shfr", delta.payload.X, delta.payload.y)
            meta = {"kind": delta.kind, "name": delta.name, "plan": None if delta.plan is None else delta.plan.to_dict()}
            (d / f"delta_{i}.json").write_text(json.dumps(meta, sort_keys=True))
        (d / "reader.json").write_text(json.dumps({"n_deltas": len(reader.deltas), "chunk_size": reader.chunk_size}))

    def _load_reader_files(self, reader_id: str) -> MutableReader:
        d = self._reader_dir(reader_id)
        info = json.loads((d / "reader.json").read_text())
        base = SampleSource.from_file(d / "base.shfr")
        deltas = []
        for i in range(info["n_deltas"]):
            meta = json.loads((d / f"delta_{i}.json").read_text())
            if meta["kind"] == "change":
                idx, X, y = container.read_change(d / f"delta_{i}.shfr")
                deltas.append(Delta("change", SampleSource(X, y), indices=idx, name=meta["name"]))
            else:
                X, y = container.read_samples(d / f"delta_{i}.shfr")
                plan = None if meta["plan"] is None else AddPlan.from_dict(meta["plan"])
                deltas.append(Delta("add", SampleSource(X, y), plan=plan, name=meta["name"]))
        return MutableReader(base, tuple(deltas), info.get("chunk_size"), reader_id)

    def reader(self, reader_id: str) -> MutableReader:
        with self._lock:
            cached = self._readers.get(reader_id)
            if cached is not None:
                return cached
            if not self._has_reader(reader_id) or self.root is None:
                raise UnknownId(f"unknown reader {reader_id!r}")
            reader = self._load_reader_files(reader_id)
            self._readers[reader_id] = reader
            return reader

    def reader_record(self, reader_id: str) -> ReaderRecord:
        with self._lock:
            row = self._db.execute("SELECT body FROM readers WHERE reader_id = ?", (reader_id,)).fetchone()
        if row is None:
            raise UnknownId(f"unknown reader {reader_id!r}")
        return ReaderRecord.from_dict(json.loads(row[0]))

    def reader_records(self) -> list[ReaderRecord]:
        with self._lock:
            rows = self._db.execute("SELECT body FROM readers ORDER BY reader_id").fetchall()
        return [ReaderRecord.from_dict(json.loads(r[0])) for r in rows]

    # -- benchmark results ------------------------------------------------

    def record_benchmark_result(
        self, model_id: str, reader_id: str, accuracy: float, wall_time: float | None = None
    ) -> None:
        result = BenchmarkResult(model_id, reader_id, float(accuracy), wall_time)
        with self._lock:
            if not self.has_model(model_id):
                raise UnknownId(f"unknown model {model_id!r}")
            if not self._has_reader(reader_id):
                raise UnknownId(f"unknown reader {reader_id!r}")
            self._db.execute("BEGIN")
            self._db.execute(
                "INSERT INTO benchmark_results (model_id, reader_id, accuracy, wall_time) VALUES (?, ?, ?, ?) "
                "ON CONFLICT(model_id, reader_id) DO UPDATE SET accuracy = excluded.accuracy, "
                "wall_time = excluded.wall_time",
                (result.model_id, result.reader_id, result.accuracy, result.wall_time),
            )
            self._bump()
            self._db.execute("COMMIT")

    def benchmark_results(self) -> list[BenchmarkResult]:
        with self._lock:
            rows = self._db.execute(
                "SELECT model_id, reader_id, accuracy, wall_time FROM benchmark_results "
                "ORDER BY model_id, reader_id"
            ).fetchall()
        return [BenchmarkResult(*r) for r in rows]

    def benchmark_result(self, model_id: str, reader_id: str) -> BenchmarkResult | None:
        for r in self.benchmark_results():
            if r.model_id == model_id and r.reader_id == reader_id:
                return r
        return None

    # -- derived caches (write-once) -------------------------------------

    def get_proxy_value(self, key: str) -> dict | None:
        with self._lock:
            row = self._cache.execute("SELECT body FROM proxy_values WHERE key = ?", (key,)).fetchone()
        return None if row is None else json.loads(row[0])

    def put_proxy_value(self, key: str, body: dict) -> None:
        with self._lock:
            self._cache.execute(
                "INSERT OR IGNORE INTO proxy_values (key, body) VALUES (?, ?)", (key, json.dumps(body, sort_keys=True))
            )

    def get_embedding(self, key: str) -> np.ndarray | None:
        with self._lock:
            row = self._cache.execute("SELECT vector FROM embeddings WHERE key = ?", (key,)).fetchone()
        if row is None:
            return None
        vec = np.frombuffer(row[0], dtype="<f8").copy()
        vec.setflags(write=False)
        return vec

    def put_embedding(self, key: str, vector: np.ndarray) -> None:
        blob = np.ascontiguousarray(vector, dtype="<f8").tobytes()
        with self._lock:
            self._cache.execute("INSERT OR IGNORE INTO embeddings (key, vector) VALUES (?, ?)", (key, blob))

    def get_execution(self, execution_id: str) -> dict | None:
        with self._lock:
            row = self._cache.execute(
                "SELECT body FROM executions WHERE execution_id = ?", (execution_id,)
            ).fetchone()
        return None if row is None else json.loads(row[0])

    def put_execution(self, execution_id: str, body: dict) -> None:
        with self._lock:
            self._cache.execute(
                "INSERT OR REPLACE INTO executions (execution_id, body) VALUES (?, ?)",
                (execution_id, json.dumps(body, sort_keys=True)),
            )

    def proxy_cache_size(self) -> int:
        with self._lock:
            return self._cache.execute("SELECT COUNT(*) FROM proxy_values").fetchone()[0]


class CatalogView:
    """Read-only scope over a catalog that hides some targets.

    Hidden targets lose their BenchmarkResults rows and are excluded from
    dataset-similarity candidate sets. The underlying store is untouched.
    """

    def __init__(self, base: Catalog, hidden: frozenset):
        self._base = base
        self.hidden_targets = frozenset(hidden)

    @property
    def store(self) -> Catalog:
        return self._base

    @property
    def version(self) -> int:
        return self._base.version

    def benchmark_results(self) -> list[BenchmarkResult]:
        return [r for r in self._base.benchmark_results() if r.reader_id not in self.hidden_targets]

    def benchmark_result(self, model_id: str, reader_id: str) -> BenchmarkResult | None:
        if reader_id in self.hidden_targets:
            return None
        return self._base.benchmark_result(model_id, reader_id)

    def sql_eval(self, statement, **kwargs):
        """Evaluate a plain SQL-subset statement against this catalog."""
        from shift.catalog.sqleval import sql_eval

        return sql_eval(self, statement, **kwargs)

    def __getattr__(self, name):
        # everything else (models, readers, caches) is shared with the store
        return getattr(self._base, name)


def holdout(catalog, target: str) -> CatalogView:
    """Scope in which ``target``'s fine-tune results are not present."""
    store = catalog.store
    if not any(r.reader_id == target for r in catalog.benchmark_results()):
        raise NoResultsForTarget(f"no benchmark results recorded for {target!r}")
    return CatalogView(store, catalog.hidden_targets | {target})

"""Query engine: lowers scoring views to task plans and assembles results.

Scoring views are evaluated bottom-up while the SQL evaluator walks the
tree. Each view turns into a :class:`TaskPlan` whose tasks cover exactly the
cache misses (feature chunks, proxy values, task embeddings); the plan runs
on the scheduler and the view's ranking is built from the resulting values.
"""

from __future__ import annotations

import dataclasses
import logging
import random
import threading
import time
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from shift import datasim
from shift.catalog.sqleval import Evaluator, Relation
from shift.errors import (
    BudgetTooSmall,
    TaskFailed,
    UnknownAttribute,
    UnknownScoringAlgorithm,
    UnresolvedReference,
)
from shift.extractors import FeatureCache, extract
from shift.hashing import digest64
from shift.optimizer import (
    PLAIN,
    SUCCESSIVE_HALVING,
    CostModelParams,
    SHConfig,
    choose_plan,
    successive_halving,
)
from shift.proxies import ProxyRequest, ProxyValue, compute_proxy, proxy_key, proxy_loss
from shift.readers import MutableReader
from shift.registry import DATASIM_METRICS
from shift.scheduler import DATASIM, INFERENCE, PROXY, DeviceConfig, Scheduler, Task, TaskPlan
from shift.shiftql import ast
from shift.shiftql.parser import parse
from shift.shiftql.printer import to_text

log = logging.getLogger(__name__)

EMBEDDING_METHOD = "moments_v1"


@dataclass
class EngineOptions:
    """Per-execution knobs; only the ones in :meth:`fingerprint` affect results."""

    force_mode: str = "auto"
    budget: int | None = None
    chunk_size: int | None = None
    feature_chunk: int | None = None
    partition_threshold: int = 1024
    use_cache: bool = True
    tie_mode: str = "id"
    seed: int = 0
    timing_fidelity: bool = False
    train_load_ms: float = 0.0
    test_load_ms: float = 0.0
    proxy_ms_per_sample: float = 0.01

    @classmethod
    def from_config(cls, cfg: dict) -> "EngineOptions":
        return cls(
            force_mode=cfg["optimizer"]["force_mode"],
            budget=cfg["optimizer"]["budget"],
            chunk_size=cfg["optimizer"]["chunk_size"],
            feature_chunk=cfg["scheduler"]["feature_chunk"],
            partition_threshold=cfg["scheduler"]["partition_threshold"],
            use_cache=cfg["cache"]["enabled"],
            tie_mode=cfg["query"]["tie_mode"],
            seed=cfg["query"]["seed"],
            timing_fidelity=cfg["query"]["timing_fidelity"],
            train_load_ms=cfg["cost"]["train_load_ms"],
            test_load_ms=cfg["cost"]["test_load_ms"],
            proxy_ms_per_sample=cfg["cost"]["proxy_ms_per_sample"],
        )

    def replace(self, **changes) -> "EngineOptions":
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})

    def fingerprint(self) -> dict:
        return {
            "force_mode": self.force_mode, "budget": self.budget, "chunk_size": self.chunk_size,
            "tie_mode": self.tie_mode, "seed": self.seed,
        }


@dataclass
class ExecutionResult:
    execution_id: str
    status: str
    ranking: list
    scores: dict
    columns: list
    rows: list
    report: dict

    def to_dict(self) -> dict:
        return {
            "execution_id": self.execution_id,
            "status": self.status,
            "ranking": list(self.ranking),
            "scores": dict(self.scores),
            "columns": list(self.columns),
            "rows": [list(r) for r in self.rows],
            "report": self.report,
        }


@dataclass
class SHResult:
    ranking: list
    values: dict
    state: object
    report: dict = field(default_factory=dict)


class _Run:
    """Bookkeeping for one execution (or one translation)."""

    def __init__(self, engine: "Engine", catalog, options: EngineOptions, bindings: dict):
        self.engine = engine
        self.catalog = catalog
        self.options = options
        self.bindings = dict(bindings or {})
        self.fcache = engine.feature_cache if options.use_cache else FeatureCache()
        self.tasks = Counter()
        self.hits = Counter()
        self.misses = Counter()
        self.calls = Counter()
        self.views: list = []
        self.warnings: list = []
        self.proxy_timings: list = []
        self.feature_keys: set = set()
        self.lock = threading.Lock()
        self._view_counter = 0

    def bump(self, counter: Counter, key: str, n: int = 1) -> None:
        with self.lock:
            counter[key] += n

    def view_label(self, name: str) -> str:
        self._view_counter += 1
        return f"view{self._view_counter}:{name}"

    def reader(self, name, clause: str) -> tuple[str, MutableReader]:
        if isinstance(name, MutableReader):
            return name.reader_id, name
        if name is None:
            raise UnresolvedReference(f"scoring view needs a {clause} reader")
        rid = self.bindings.get(name, name)
        if not self.catalog.has_reader(rid):
            raise UnresolvedReference(f"reader {name!r} does not resolve to a registered reader")
        return rid, self.catalog.reader(rid)

    def n_classes(self, reader_id: str) -> int | None:
        try:
            return self.catalog.reader_record(reader_id).label_cardinality
        except Exception:
            return None

    def report(self) -> dict:
        lookups = sum(self.hits.values()) + sum(self.misses.values())
        return {
            "tasks": {k: self.tasks.get(k, 0) for k in (INFERENCE, PROXY, DATASIM)},
            "cache": {
                "hits": dict(self.hits),
                "misses": dict(self.misses),
                "hit_rate": 1.0 if lookups == 0 else sum(self.hits.values()) / lookups,
                "enabled": self.options.use_cache,
            },
            "calls": {k: self.calls.get(k, 0) for k in ("extract", "proxy", "datasim")},
            "views": self.views,
            "warnings": list(self.warnings),
        }


class Engine:
    """Executes ShiftQL queries against a catalog.

    Args:
        catalog: a :class:`~shift.catalog.Catalog` or a scoped view of one.
        feature_cache: content-addressed feature store; defaults to
            ``<catalog root>/features`` or memory for in-memory catalogs.
        devices: device layout for the scheduler.
        options: default execution options.
    """

    def __init__(self, catalog, *, feature_cache: FeatureCache | None = None,
                 devices: DeviceConfig | None = None, options: EngineOptions | None = None):
        self.catalog = catalog
        if feature_cache is None:
            root = catalog.store.root
            feature_cache = FeatureCache(None if root is None else root / "features")
        self.feature_cache = feature_cache
        self.devices = devices or DeviceConfig(cpu_threads=1)
        self.scheduler = Scheduler(self.devices)
        self.options = options or EngineOptions()
        self.calls = Counter()
        self._lock = threading.Lock()

    @classmethod
    def from_config(cls, cfg: dict, catalog=None) -> "Engine":
        from shift.catalog import Catalog

        catalog = catalog if catalog is not None else Catalog(cfg["catalog"]["path"])
        features = cfg["cache"]["features_path"]
        cache = None
        if features is not None or cfg["cache"]["max_bytes"] is not None:
            root = features if features is not None else (
                None if catalog.store.root is None else catalog.store.root / "features"
            )
            cache = FeatureCache(root, cfg["cache"]["max_bytes"])
        dev = cfg["devices"]
        devices = DeviceConfig(dev["accelerators"], dev["accelerator_speeds"], dev["cpu_threads"],
                               dev["proxy_placement"])
        return cls(catalog, feature_cache=cache, devices=devices, options=EngineOptions.from_config(cfg))

    @property
    def n_accelerators(self) -> int:
        return self.devices.accelerators

    # -- public entry points ----------------------------------------------

    @staticmethod
    def _tree(query) -> ast.Query:
        if isinstance(query, str):
            return parse(query)
        if isinstance(query, ast.Query):
            return query
        return ast.Query(query)

    def execution_id(self, query, bindings: dict | None = None, catalog=None, **overrides) -> str:
        catalog = catalog if catalog is not None else self.catalog
        options = self.options.replace(**overrides)
        return digest64(
            "execution", to_text(self._tree(query)), sorted((bindings or {}).items()), catalog.version,
            sorted(catalog.hidden_targets), options.fingerprint(),
        )

    def execute(self, query, *, bindings: dict | None = None, catalog=None, persist: bool = True,
                **overrides) -> ExecutionResult:
        """Run a query and return its ranking, scores and execution report.

        Raises:
            TaskFailed: a task failed; ``failures`` names every failed node.
        """
        t0 = time.perf_counter()
        tree = self._tree(query)
        catalog = catalog if catalog is not None else self.catalog
        options = self.options.replace(**overrides)
        run = _Run(self, catalog, options, bindings)
        evaluator = Evaluator(
            catalog, scoring=lambda node, pool, ctx: self._score(run, node, pool, ctx),
            tie_mode=options.tie_mode, seed=options.seed,
        )
        rel = evaluator.run(tree)
        run.warnings.extend(w for w in evaluator.warnings if w not in run.warnings)
        ranking = _ranking(rel)
        scores = {k: rel.scores[k] for k in ranking if k in rel.scores}
        report = run.report()
        report["wall_time_ms"] = (time.perf_counter() - t0) * 1000.0
        eid = digest64(
            "execution", to_text(tree), sorted(run.bindings.items()), catalog.version,
            sorted(catalog.hidden_targets), options.fingerprint(),
        )
        result = ExecutionResult(eid, "done", ranking, scores, list(rel.columns), rel.tuples(), report)
        if persist:
            catalog.store.put_execution(eid, {
                "query": to_text(tree), "bindings": run.bindings, "options": options.fingerprint(),
                "features": sorted(run.feature_keys), "result": result.to_dict(),
            })
        with self._lock:
            self.calls.update(run.calls)
        return result

    def translate(self, query, *, bindings: dict | None = None, catalog=None, **overrides) -> TaskPlan:
        """Lower a query to one task plan without running it.

        Each scoring view contributes the tasks for its cache misses in Plain
        layout; ``plan.modes`` records the optimizer's decision per view. A
        view whose pool depends on another scoring view's output is planned
        against that view's unranked pool.
        """
        tree = self._tree(query)
        catalog = catalog if catalog is not None else self.catalog
        options = self.options.replace(**overrides)
        run = _Run(self, catalog, options, bindings)
        plan = TaskPlan()
        evaluator = Evaluator(
            catalog, scoring=lambda node, pool, ctx: self._plan_view(run, plan, node, pool),
            tie_mode=options.tie_mode, seed=options.seed,
        )
        evaluator.run(tree)
        plan.cache_hits.update(run.hits)
        return plan

    # -- shared lowering helpers -------------------------------------------

    def plain_chunk(self, reader: MutableReader, options: EngineOptions | None = None) -> int:
        """Feature-chunk size for Plain lowering of ``reader``.

        An explicit ``feature_chunk`` wins; otherwise large readers are split
        into one partition per accelerator and small ones stay whole.
        """
        options = options or self.options
        if options.feature_chunk:
            return int(options.feature_chunk)
        n = len(reader.base)
        if self.n_accelerators > 1 and n >= options.partition_threshold:
            return -(-n // self.n_accelerators)
        return max(n, 1)

    def _need_features(self, run: _Run, plan: TaskPlan, model, reader, role: str, chunk_size: int,
                       stop: int | None = None) -> list:
        deps = []
        for ch in reader.feature_chunks(chunk_size, 0, stop):
            tid = f"inference:{model.model_id}:{ch.xhash}"
            run.feature_keys.add((model.model_id, ch.xhash))
            if tid in plan.tasks:
                deps.append(tid)
                continue
            if (model.model_id, ch.xhash) in run.fcache:
                run.bump(run.hits, "features")
                continue
            run.bump(run.misses, "features")
            plan.add(Task(tid, INFERENCE, fn=self._inference_fn(run, model, reader, ch), meta={
                "model_id": model.model_id, "reader_id": reader.reader_id, "role": role,
                "rows": ch.size, "reader_rows": len(reader), "chunk": ch.xhash,
            }))
            deps.append(tid)
        return deps

    def _inference_fn(self, run: _Run, model, reader, chunk):
        def work():
            fm = extract(model, reader.chunk_inputs(chunk), chunk_hash=chunk.xhash,
                         timing_fidelity=run.options.timing_fidelity)
            run.fcache.put(model.model_id, chunk.xhash, fm.values)
            run.bump(run.calls, "extract")
            return chunk.xhash
        return work

    def _features(self, run: _Run, model, reader, chunk_size: int, stop: int | None) -> np.ndarray:
        def lookup(ch):
            values = run.fcache.get(model.model_id, ch.xhash)
            if values is None:  # evicted between planning and use
                values = extract(model, reader.chunk_inputs(ch), chunk_hash=ch.xhash).values
                run.fcache.put(model.model_id, ch.xhash, values)
                run.bump(run.calls, "extract")
            return values
        return reader.gather_features(chunk_size, lookup, 0, stop)

    def _proxy_fn(self, run: _Run, model, request, train, test, n_train, c_train, c_test, key, hashes,
                  n_classes, sink: dict):
        def work():
            train_X = self._features(run, model, train, c_train, n_train)
            test_X = self._features(run, model, test, c_test, None)
            _, train_y = train.materialize(0, n_train)
            _, test_y = test.materialize()
            t0 = time.perf_counter()
            value = compute_proxy(train_X, train_y, test_X, test_y, request, n_classes)
            elapsed = (time.perf_counter() - t0) * 1000.0
            pv = ProxyValue(value, model.model_id, request.method, hashes[0], hashes[1], n_train)
            if run.options.use_cache:
                run.catalog.store.put_proxy_value(key, pv.to_dict())
            with run.lock:
                sink[model.model_id] = value
                run.calls["proxy"] += 1
                run.proxy_timings.append((n_train, elapsed))
            return value
        return work

    def _proxy_round(self, run: _Run, request, models, train, test, n_train: int, c_train: int,
                     c_test: int, n_classes, plan: TaskPlan | None = None) -> dict:
        """Proxy values for ``models`` on the first ``n_train`` train rows.

        With ``plan`` given the tasks are only added; otherwise they run now.
        """
        train_hash = train.content_hash(0, n_train)
        test_hash = test.content_hash()
        local = plan is None
        plan = TaskPlan() if local else plan
        values: dict = {}
        for model in models:
            key = proxy_key(model.model_id, request, train_hash, test_hash, n_train)
            cached = run.catalog.store.get_proxy_value(key) if run.options.use_cache else None
            if cached is not None:
                run.bump(run.hits, "proxy")
                values[model.model_id] = cached["value"]
                continue
            run.bump(run.misses, "proxy")
            tid = f"proxy:{model.model_id}:{key}"
            if tid in plan.tasks:
                continue
            deps = self._need_features(run, plan, model, train, "train", c_train, n_train)
            deps += self._need_features(run, plan, model, test, "test", c_test)
            plan.add(Task(tid, PROXY, deps=deps, fn=self._proxy_fn(
                run, model, request, train, test, n_train, c_train, c_test, key, (train_hash, test_hash),
                n_classes, values,
            ), meta={"model_id": model.model_id, "method": request.method, "n_train": n_train,
                     "n_test": len(test)}))
        if local:
            self._run_plan(run, plan)
        return values

    def _run_plan(self, run: _Run, plan: TaskPlan) -> None:
        if not plan.tasks:
            return
        for kind, n in plan.counts().items():
            run.bump(run.tasks, kind, n)
        handle = self.scheduler.run(plan)
        if handle.errors:
            failures = {}
            for tid, err in handle.errors.items():
                meta = plan.tasks[tid].meta
                where = ", ".join(f"{k}={meta[k]}" for k in ("model_id", "reader_id") if k in meta)
                failures[tid] = f"{err} [{where}]" if where else err
            raise TaskFailed(failures)

    # -- proxy scoring views -------------------------------------------------

    def _decide(self, run: _Run, request: ProxyRequest, node, models, train, test) -> tuple[str, dict]:
        options = run.options
        M, q = len(models), node.limit
        detail: dict = {}
        eligible = request.is_accuracy and not node.descending and M >= 2 and M > q
        if not eligible:
            if options.force_mode == "sh":
                run.warnings.append(
                    f"successive halving not applicable to {request.method} "
                    f"({'DESC order' if node.descending else f'M={M}, K={q}'}); using Plain"
                )
            return PLAIN, detail
        if options.force_mode == "plain":
            return PLAIN, detail
        try:
            B, C = SHConfig(options.budget, options.chunk_size, q, options.seed).resolve(M, len(train))
        except BudgetTooSmall:
            if options.force_mode == "sh":
                raise
            return PLAIN, detail
        detail.update(B=B, C=C)
        if options.force_mode == "sh":
            return SUCCESSIVE_HALVING, detail
        params = CostModelParams(
            P=max(1, self.n_accelerators), L=[m.load_cost for m in models],
            I=[m.per_sample_inference_cost for m in models], N=len(train), O=len(test),
            T_N=options.train_load_ms, T_O=options.test_load_ms, E_proxy=options.proxy_ms_per_sample,
        )
        return choose_plan(params, C, B, q), detail

    def _score(self, run: _Run, node, pool: Relation, context: dict) -> Relation:
        if isinstance(node, ast.DatasetSimilarityView):
            return self._score_datasim(run, node, pool, context)
        request = ProxyRequest.from_call(node.algorithm.name, node.algorithm.args)
        train_id, train = run.reader(node.train_reader, "TRAINED ON")
        test_id, test = run.reader(node.test_reader, "TESTED ON")
        if node.with_readers:
            for name in node.with_readers:
                run.reader(name, "WITH")
        model_ids = _pool_ids(pool, "ModelId")
        models = [run.catalog.model(m) for m in model_ids]
        label = run.view_label(request.method)
        info = {"view": label, "algorithm": request.method, "pool_size": len(models), "limit": node.limit,
                "train_reader": train_id, "test_reader": test_id}
        if not models:
            info["mode"] = PLAIN
            run.views.append(info)
            return Relation(list(pool.columns), [], pool.views, {}, [])
        mode, detail = self._decide(run, request, node, models, train, test)
        info.update(mode=mode, **detail)
        n_classes = _max_opt(run.n_classes(train_id), run.n_classes(test_id))
        if mode == PLAIN:
            values = self._proxy_round(run, request, models, train, test, len(train), self.plain_chunk(train, run.options),
                                       self.plain_chunk(test, run.options), n_classes)
            losses = {m: proxy_loss(request.method, v) for m, v in values.items()}
            ranking = _order(model_ids, losses, node.descending, run.options)
        else:
            result = self._sh(run, request, models, train, test, detail["B"], detail["C"], node.limit, n_classes)
            info["sh"] = result.state.to_dict()
            values, ranking = result.values, result.ranking
        run.views.append(info)
        info["scores"] = {m: values[m] for m in ranking}
        top = ranking[: node.limit]
        first = _first_rows(pool, "ModelId")
        rows = [first[m] for m in top]
        return Relation(list(pool.columns), rows, pool.views, {m: values[m] for m in top}, [])

    def _sh(self, run: _Run, request, models, train, test, B: int, C: int, q: int, n_classes,
            bucket_sizes: list | None = None) -> SHResult:
        by_id = {m.model_id: m for m in models}
        c_test = self.plain_chunk(test, run.options)
        buckets = list(bucket_sizes) if bucket_sizes is not None else train.bucket_sizes(C)

        def evaluate(survivors, n_samples):
            vals = self._proxy_round(run, request, [by_id[a] for a in survivors], train, test, n_samples, C,
                                     c_test, n_classes)
            return {a: proxy_loss(request.method, vals[a]) for a in survivors}

        state = successive_halving(list(by_id), evaluate, buckets, B, q)
        values = {a: _value_from_loss(request.method, loss) for a, loss in state.final_losses.items()}
        return SHResult(list(state.ranking), values, state)

    def run_successive_halving(self, models, train, test, request: ProxyRequest, config: SHConfig, *,
                               bucket_sizes: list | None = None, bindings: dict | None = None,
                               **overrides) -> SHResult:
        """Successive halving over ``models`` outside of a query.

        ``train``/``test`` are reader ids (resolved through ``bindings``) or
        reader objects. ``bucket_sizes`` overrides the reader's own layout.
        """
        if not request.is_accuracy:
            raise UnknownScoringAlgorithm(f"successive halving needs an accuracy proxy, not {request.method}")
        options = self.options.replace(**overrides)
        run = _Run(self, self.catalog, options, bindings)
        train_id, train = run.reader(train, "TRAINED ON")
        test_id, test = run.reader(test, "TESTED ON")
        records = [m if hasattr(m, "model_id") else self.catalog.model(m) for m in models]
        n_train = sum(bucket_sizes) if bucket_sizes is not None else len(train)
        B, C = config.resolve(len(records), n_train)
        n_classes = _max_opt(run.n_classes(train_id), run.n_classes(test_id)) if train_id else None
        result = self._sh(run, request, records, train, test, B, C, config.q, n_classes, bucket_sizes)
        result.report = run.report()
        return result

    # -- dataset similarity views ----------------------------------------------

    def embedding_key(self, reader: MutableReader, method: str = EMBEDDING_METHOD) -> str:
        return digest64("embedding", method, reader.content_hash())

    def _need_embedding(self, run: _Run, plan: TaskPlan, reader_id: str, sink: dict) -> None:
        reader = run.catalog.reader(reader_id)
        key = self.embedding_key(reader)
        vec = run.catalog.store.get_embedding(key) if run.options.use_cache else None
        if vec is not None:
            run.bump(run.hits, "embedding")
            sink[reader_id] = vec
            return
        run.bump(run.misses, "embedding")
        tid = f"datasim:{reader_id}:{key}"
        if tid in plan.tasks:
            return

        def work():
            emb = datasim.embed_dataset(reader, EMBEDDING_METHOD, reader_id)
            if run.options.use_cache:
                run.catalog.store.put_embedding(key, emb.vector)
            with run.lock:
                sink[reader_id] = emb.vector
                run.calls["datasim"] += 1
            return key

        plan.add(Task(tid, DATASIM, fn=work, meta={"reader_id": reader_id, "method": EMBEDDING_METHOD}))

    def embed_readers(self, reader_ids, **overrides) -> dict:
        """Compute (or fetch) task embeddings for registered readers."""
        run = _Run(self, self.catalog, self.options.replace(**overrides), {})
        plan, sink = TaskPlan(), {}
        for rid in reader_ids:
            self._need_embedding(run, plan, rid, sink)
        self._run_plan(run, plan)
        return sink

    def _score_datasim(self, run: _Run, node, pool: Relation, context: dict) -> Relation:
        name = node.metric.name
        if name not in DATASIM_METRICS:
            raise UnknownScoringAlgorithm(f"unknown dataset similarity metric {name!r}")
        metric = node.metric.kwargs().get("metric", DATASIM_METRICS[name])
        target_id, _ = run.reader(node.target, "TESTED AGAINST")
        label = run.view_label(name)
        hidden = run.catalog.hidden_targets
        candidates = [r for r in _pool_ids(pool, "DataReaderId") if r != target_id and r not in hidden]
        plan, vectors = TaskPlan(), {}
        for rid in [target_id] + candidates:
            self._need_embedding(run, plan, rid, vectors)
        self._run_plan(run, plan)
        target = datasim.TaskEmbedding(target_id, EMBEDDING_METHOD, vectors[target_id])
        usable = []
        for rid in candidates:
            if vectors[rid].shape != target.vector.shape:
                run.warnings.append(f"reader {rid} skipped: embedding dimension differs from {target_id}")
                continue
            usable.append(datasim.TaskEmbedding(rid, EMBEDDING_METHOD, vectors[rid]))
        ranked = datasim.rank_datasets(target, usable, metric)
        if node.descending:
            ranked = sorted(ranked, key=lambda t: (-t[1], t[0]))
        if context.get("benchmark_join"):
            with_rows = {r.reader_id for r in run.catalog.benchmark_results()}
            kept = [t for t in ranked if t[0] in with_rows]
            if ranked and kept and kept[0][0] != ranked[0][0]:
                run.warnings.append(
                    f"nearest reader {ranked[0][0]} has no benchmark results; using {kept[0][0]}"
                )
            ranked = kept
        top = ranked[: node.limit]
        run.views.append({"view": label, "metric": metric, "target": target_id, "pool_size": len(candidates),
                          "limit": node.limit, "distances": {r: d for r, d in ranked}})
        first = _first_rows(pool, "DataReaderId")
        rows = [first[r] for r, _ in top]
        return Relation(list(pool.columns), rows, pool.views, {r: d for r, d in top}, list(run.warnings))

    # -- translation only --------------------------------------------------------

    def _plan_view(self, run: _Run, plan: TaskPlan, node, pool: Relation) -> Relation:
        if isinstance(node, ast.DatasetSimilarityView):
            if node.metric.name not in DATASIM_METRICS:
                raise UnknownScoringAlgorithm(f"unknown dataset similarity metric {node.metric.name!r}")
            target_id, _ = run.reader(node.target, "TESTED AGAINST")
            hidden = run.catalog.hidden_targets
            candidates = [r for r in _pool_ids(pool, "DataReaderId") if r != target_id and r not in hidden]
            for rid in [target_id] + candidates:
                self._need_embedding(run, plan, rid, {})
            plan.modes[run.view_label(node.metric.name)] = "DataSim"
            first = _first_rows(pool, "DataReaderId")
            return Relation(list(pool.columns), [first[r] for r in candidates[: node.limit]], pool.views)
        request = ProxyRequest.from_call(node.algorithm.name, node.algorithm.args)
        train_id, train = run.reader(node.train_reader, "TRAINED ON")
        test_id, test = run.reader(node.test_reader, "TESTED ON")
        model_ids = _pool_ids(pool, "ModelId")
        models = [run.catalog.model(m) for m in model_ids]
        mode = PLAIN
        if models:
            mode, _ = self._decide(run, request, node, models, train, test)
            n_classes = _max_opt(run.n_classes(train_id), run.n_classes(test_id))
            self._proxy_round(run, request, models, train, test, len(train), self.plain_chunk(train, run.options),
                              self.plain_chunk(test, run.options), n_classes, plan=plan)
        plan.modes[run.view_label(request.method)] = mode
        first = _first_rows(pool, "ModelId")
        return Relation(list(pool.columns), [first[m] for m in model_ids[: node.limit]], pool.views)


def annotate_costs(plan: TaskPlan, catalog, *, train_load_ms: float = 0.0, test_load_ms: float = 0.0,
                   proxy_ms_per_sample: float = 0.0) -> TaskPlan:
    """Attach simulated durations (ms) that follow the analytic cost model.

    A reader's model load and train-data load are apportioned to its chunks
    by row share, so the chunk costs of one (model, reader) pair add up to
    the per-model terms of the plain cost formula. DataSim tasks are left
    without a cost.
    """
    for task in plan:
        meta = task.meta
        if task.kind == INFERENCE:
            model = catalog.model(meta["model_id"])
            share = meta["rows"] / meta["reader_rows"] if meta["reader_rows"] else 0.0
            fixed = model.load_cost + (train_load_ms if meta["role"] == "train" else 0.0)
            task.cost = fixed * share + model.per_sample_inference_cost * meta["rows"]
        elif task.kind == PROXY:
            task.cost = test_load_ms + proxy_ms_per_sample * meta["n_train"]
    return plan


def _value_from_loss(method: str, loss: float) -> float:
    return -loss if method == "LEEP" else 1.0 - loss


def _max_opt(*values):
    present = [v for v in values if v is not None]
    return max(present) if present else None


def _pool_ids(pool: Relation, column: str) -> list:
    if pool.rows and column not in pool.columns:
        raise UnknownAttribute(f"scoring view pool must expose {column}")
    seen, out = set(), []
    for row in pool.rows:
        value = row.get(column)
        if value is not None and value not in seen:
            seen.add(value)
            out.append(value)
    return out


def _first_rows(pool: Relation, column: str) -> dict:
    out: dict = {}
    for row in pool.rows:
        out.setdefault(row.get(column), row)
    return out


def _order(ids: list, losses: dict, descending: bool, options: EngineOptions) -> list:
    if options.tie_mode == "random":
        shuffled = list(ids)
        random.Random(options.seed).shuffle(shuffled)
        tie = {m: i for i, m in enumerate(shuffled)}
    else:
        tie = {m: m for m in ids}
    sign = -1.0 if descending else 1.0
    return sorted(ids, key=lambda m: (sign * losses[m], tie[m]))


def _ranking(rel: Relation) -> list:
    if not rel.columns:
        return []
    column = next((c for c in ("ModelId", "DataReaderId") if c in rel.columns), rel.columns[0])
    seen, out = set(), []
    for v in rel.values(column):
        if v not in seen:
            seen.add(v)
            out.append(v)
    return out

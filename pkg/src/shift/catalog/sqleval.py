"""Evaluator for the SQL subset over the three catalog views.

Rows are dictionaries keyed by unqualified attribute name; the views share
only their join keys (ModelId, DataReaderId), so NATURAL JOIN merges exactly
those. Scoring and similarity views are delegated to a callback supplied by
the query engine.
"""

from __future__ import annotations

import functools
import random
from dataclasses import dataclass, field
from typing import Callable

from shift.errors import ShiftError, TypeMismatch, UnknownAttribute, UnknownView, UnresolvedReference
from shift.shiftql import ast

MODELS = "Models"
READERS = "DataReaders"
RESULTS = "BenchmarkResults"

SCHEMA = {
    MODELS: ("ModelId", "Source", "Input", "nParam", "UpstreamAccuracy", "FeatureDim", "InferenceCost", "LoadCost"),
    READERS: ("DataReaderId", "Modality", "NumSamples", "NumClasses", "Type", "Kind", "Parent"),
    RESULTS: ("ModelId", "DataReaderId", "Accuracy", "WallTime"),
}
VIEW_ALIASES = {
    "Models": MODELS, "Model": MODELS,
    "DataReaders": READERS, "DataReader": READERS,
    "BenchmarkResults": RESULTS, "BenchmarkResult": RESULTS,
}
ATTRIBUTE_ALIASES = {"ReaderId": "DataReaderId"}
# computed attributes: name -> (view, function of row)
PSEUDO = {"FineTune": (RESULTS, lambda row: None if row.get("Accuracy") is None else 1.0 - row["Accuracy"])}
ID_KEYS = ("ModelId", "DataReaderId")


@dataclass
class Relation:
    columns: list
    rows: list  # list of dicts
    views: dict = field(default_factory=dict)  # qualifier -> set of attribute names
    scores: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def values(self, column: str | None = None) -> list:
        col = column or self.columns[0]
        return [r.get(col) for r in self.rows]

    def tuples(self) -> list[tuple]:
        return [tuple(r.get(c) for c in self.columns) for r in self.rows]


def base_relation(catalog, view: str) -> Relation:
    if view == MODELS:
        rows = [
            {
                "ModelId": m.model_id,
                "Source": m.source,
                "Input": m.input_modality,
                "nParam": m.n_params,
                "UpstreamAccuracy": m.upstream_accuracy,
                "FeatureDim": m.feature_dim,
                "InferenceCost": m.per_sample_inference_cost,
                "LoadCost": m.load_cost,
            }
            for m in catalog.models()
        ]
    elif view == READERS:
        rows = [
            {
                "DataReaderId": r.reader_id,
                "Modality": r.modality,
                "NumSamples": r.n_samples,
                "NumClasses": r.label_cardinality,
                "Type": r.type_tag,
                "Kind": r.reader_kind,
                "Parent": r.parent_reader,
            }
            for r in catalog.reader_records()
        ]
    elif view == RESULTS:
        rows = [
            {"ModelId": b.model_id, "DataReaderId": b.reader_id, "Accuracy": b.accuracy, "WallTime": b.wall_time}
            for b in catalog.benchmark_results()
        ]
    else:
        raise UnknownView(f"unknown view {view!r}")
    return Relation(list(SCHEMA[view]), rows, {view: set(SCHEMA[view])})


def natural_join(left: Relation, right: Relation) -> Relation:
    shared = [c for c in left.columns if c in right.columns]
    index: dict = {}
    for r in right.rows:
        index.setdefault(tuple(r.get(c) for c in shared), []).append(r)
    rows = []
    for l in left.rows:
        for r in index.get(tuple(l.get(c) for c in shared), ()):
            rows.append({**l, **r})
    columns = left.columns + [c for c in right.columns if c not in left.columns]
    views = {**left.views, **right.views}
    scores = {**left.scores, **right.scores}
    return Relation(columns, rows, views, scores, left.warnings + right.warnings)


class Evaluator:
    """Evaluates query nodes against a catalog snapshot.

    Args:
        catalog: a :class:`Catalog` or :class:`CatalogView`.
        scoring: callback ``(node, pool_relation, context) -> Relation`` for
            proxy scoring and dataset similarity views.
        bindings: named definitions the tree refers to.
        tie_mode: ``"id"`` (ascending ids) or ``"random"`` (seeded shuffle).
    """

    def __init__(self, catalog, scoring: Callable | None = None, bindings: dict | None = None,
                 tie_mode: str = "id", seed: int = 0):
        self.catalog = catalog
        self.scoring = scoring
        self.bindings = dict(bindings or {})
        self.named: dict[str, Relation] = {}
        self.tie_mode = tie_mode
        self.seed = seed
        self.warnings: list[str] = []
        self._base: dict[str, Relation] = {}

    # -- entry points -----------------------------------------------------

    def run(self, node, context: dict | None = None) -> Relation:
        context = context or {}
        if isinstance(node, ast.Query):
            self.bindings.update(node.binding_map())
            node = node.root
        if isinstance(node, ast.SqlFilter):
            return self.eval_filter(node, context)
        if isinstance(node, (ast.ProxyScoringView, ast.DatasetSimilarityView)):
            if self.scoring is None:
                raise ShiftError("scoring views need the query engine; sql_eval handles plain SQL only")
            pool = self.eval_filter(node.inner, context)
            rel = self.scoring(node, pool, context)
            self.warnings.extend(rel.warnings)
            return rel
        if isinstance(node, ast.SetOp):
            left = self.run(node.left, context)
            right = self.run(node.right, context)
            return self.union(left, right)
        if isinstance(node, ast.Nested):
            rel = self.run(node.body, context)
            rel = Relation(rel.columns, rel.rows, {node.alias: set(rel.columns)}, rel.scores, rel.warnings)
            self.named[node.alias] = rel
            return rel
        if isinstance(node, ast.NamedRef):
            return self.resolve_name(node.name, context)
        raise TypeError(f"cannot evaluate {type(node).__name__}")

    def resolve_name(self, name: str, context: dict | None = None) -> Relation:
        if name in self.named:
            return self.named[name]
        if name in self.bindings:
            rel = self.run(ast.Nested(name, self.bindings[name]), context)
            return rel
        raise UnresolvedReference(f"unresolved reference {name!r}")

    @staticmethod
    def union(left: Relation, right: Relation) -> Relation:
        if len(left.columns) != len(right.columns):
            raise TypeMismatch("UNION operands have different column counts")
        seen = set()
        rows = []
        for rel in (left, right):
            for r in rel.rows:
                key = tuple(r.get(c) for c in rel.columns)
                if key in seen:
                    continue
                seen.add(key)
                rows.append(dict(zip(left.columns, key)))
        return Relation(list(left.columns), rows, {}, {**right.scores, **left.scores}, left.warnings + right.warnings)

    # -- SELECT -----------------------------------------------------------

    def _base_view(self, view: str) -> Relation:
        if view not in self._base:
            self._base[view] = base_relation(self.catalog, view)
        rel = self._base[view]
        return Relation(list(rel.columns), rel.rows, {view: set(rel.columns)})

    def eval_source(self, src, context) -> Relation:
        if isinstance(src, ast.TableRef):
            if src.name in VIEW_ALIASES:
                rel = self._base_view(VIEW_ALIASES[src.name])
            elif src.name in self.named or src.name in self.bindings:
                rel = self.resolve_name(src.name, context)
                rel = Relation(rel.columns, rel.rows, {src.name: set(rel.columns)}, rel.scores, rel.warnings)
            else:
                raise UnknownView(f"unknown view {src.name!r}")
            if src.alias:
                rel.views = {**rel.views, src.alias: set(rel.columns)}
            return rel
        rel = self.run(src.query, context)
        views = {src.alias: set(rel.columns)} if src.alias else {}
        return Relation(rel.columns, rel.rows, views, rel.scores, rel.warnings)

    def _column_refs(self, f: ast.SqlFilter) -> list[ast.ColumnRef]:
        refs = [c for c in f.columns if isinstance(c, ast.ColumnRef)]
        refs += [i.expr for i in f.order_by if isinstance(i.expr, ast.ColumnRef)]
        if f.window is not None:
            refs += list(f.window.group_by) + [i.expr for i in f.window.order]
        if f.where is not None:
            refs += _where_refs(f.where)
        return refs

    def _needed_view(self, ref: ast.ColumnRef, rel: Relation) -> str | None:
        """Base view to join implicitly so that ``ref`` resolves, if any."""
        name = ATTRIBUTE_ALIASES.get(ref.name, ref.name)
        if ref.qualifier is not None:
            if ref.qualifier in rel.views:
                return None
            view = VIEW_ALIASES.get(ref.qualifier)
            if view is None:
                raise UnknownAttribute(f"unknown qualifier {ref.qualifier!r}")
            if name not in SCHEMA[view] and PSEUDO.get(name, (None,))[0] != view:
                raise UnknownAttribute(f"view {view} has no attribute {ref.name!r}")
            return view
        if name in rel.columns or name in PSEUDO and PSEUDO[name][0] in rel.views:
            return None
        if name in PSEUDO:
            return PSEUDO[name][0]
        owners = [v for v, cols in SCHEMA.items() if name in cols]
        if not owners:
            raise UnknownAttribute(f"unknown attribute {ref.name!r}")
        return owners[0]

    def _implicit_join(self, rel: Relation, view: str) -> Relation:
        if view in rel.views:
            return rel
        keys = [k for k in ID_KEYS if k in rel.columns and k in SCHEMA[view]]
        if keys:
            return natural_join(rel, self._base_view(view))
        if RESULTS not in rel.views:
            rel = natural_join(rel, self._base_view(RESULTS))
        return natural_join(rel, self._base_view(view))

    def eval_filter(self, f: ast.SqlFilter, context: dict) -> Relation:
        rel = self.eval_source(f.sources[0], context)
        for src in f.sources[1:]:
            rel = natural_join(rel, self.eval_source(src, context))
        for ref in self._column_refs(f):
            view = self._needed_view(ref, rel)
            if view is not None:
                rel = self._implicit_join(rel, view)
        uses_results = RESULTS in rel.views
        if f.where is not None:
            ctx = {**context, "benchmark_join": uses_results}
            rows = [r for r in rel.rows if self.eval_expr(f.where, r, rel, ctx) is True]
            rel = Relation(rel.columns, rows, rel.views, rel.scores, rel.warnings)
        if f.window is not None:
            rel = self.apply_window(rel, f.window)
        if f.order_by:
            rel.rows = self.sort_rows(rel.rows, rel, f.order_by)
        if f.limit is not None:
            rel.rows = rel.rows[: f.limit]
        return self.project(rel, f.columns)

    def project(self, rel: Relation, columns) -> Relation:
        if any(isinstance(c, ast.Star) for c in columns):
            return rel
        names = [self._attr(c, rel) for c in columns]
        rows = [{n: self.value(c, r, rel) for n, c in zip(names, columns)} for r in rel.rows]
        views = {q: {n for n in names if n in cols} for q, cols in rel.views.items()}
        return Relation(names, rows, views, rel.scores, rel.warnings)

    def _attr(self, ref: ast.ColumnRef, rel: Relation) -> str:
        name = ATTRIBUTE_ALIASES.get(ref.name, ref.name)
        if name in PSEUDO:
            return name
        if ref.qualifier is not None and ref.qualifier in rel.views and name not in rel.views[ref.qualifier]:
            if not (ref.qualifier in VIEW_ALIASES and name in SCHEMA[VIEW_ALIASES[ref.qualifier]]):
                raise UnknownAttribute(f"{ref.qualifier} has no attribute {ref.name!r}")
        if name not in rel.columns:
            raise UnknownAttribute(f"unknown attribute {ref.name!r}")
        return name

    def value(self, ref: ast.ColumnRef, row: dict, rel: Relation):
        name = self._attr(ref, rel)
        if name in PSEUDO:
            return PSEUDO[name][1](row)
        return row.get(name)

    # -- expressions ------------------------------------------------------

    def eval_expr(self, expr, row: dict, rel: Relation, context: dict):
        if isinstance(expr, ast.Literal):
            return expr.value
        if isinstance(expr, ast.ColumnRef):
            return self.value(expr, row, rel)
        if isinstance(expr, ast.Compare):
            return _compare(expr.op, self.eval_expr(expr.left, row, rel, context),
                            self.eval_expr(expr.right, row, rel, context))
        if isinstance(expr, ast.BoolOp):
            vals = [self.eval_expr(e, row, rel, context) for e in expr.operands]
            if expr.op == "AND":
                if any(v is False for v in vals):
                    return False
                return None if any(v is None for v in vals) else True
            if any(v is True for v in vals):
                return True
            return None if any(v is None for v in vals) else False
        if isinstance(expr, ast.Not):
            v = self.eval_expr(expr.operand, row, rel, context)
            return None if v is None else not v
        if isinstance(expr, ast.IsNull):
            v = self.eval_expr(expr.expr, row, rel, context)
            return (v is not None) if expr.negated else (v is None)
        if isinstance(expr, ast.InPredicate):
            v = self.eval_expr(expr.expr, row, rel, context)
            members = self.in_values(expr.source, context)
            if v is None:
                return None
            hit = v in members
            return (not hit) if expr.negated else hit
        raise TypeError(f"not an expression: {expr!r}")

    def in_values(self, source, context) -> frozenset:
        cache_key = ("in", source, context.get("benchmark_join", False))
        cached = self._base.get(cache_key)
        if cached is not None:
            return cached
        if isinstance(source, tuple):
            vals = frozenset(lit.value for lit in source)
        else:
            rel = self.run(source, {**context, "in_predicate": True})
            vals = frozenset(rel.values())
        self._base[cache_key] = vals
        return vals

    # -- ordering ---------------------------------------------------------

    def sort_rows(self, rows: list, rel: Relation, order) -> list:
        def key_values(row):
            return [self.value(i.expr, row, rel) for i in order]

        keyed = [(key_values(r), r) for r in rows]

        def cmp(a, b):
            for item, x, y in zip(order, a[0], b[0]):
                c = _cmp_values(x, y, item.descending)
                if c:
                    return c
            if self.tie_mode == "id":
                for k in ID_KEYS:
                    x, y = a[1].get(k), b[1].get(k)
                    c = _cmp_values(x, y, False)
                    if c:
                        return c
            return 0

        if self.tie_mode == "random":
            random.Random(self.seed).shuffle(keyed)
        keyed.sort(key=functools.cmp_to_key(cmp))
        return [r for _, r in keyed]

    def apply_window(self, rel: Relation, window: ast.WindowRank) -> Relation:
        groups: dict = {}
        for r in rel.rows:
            key = tuple(self.value(g, r, rel) for g in window.group_by)
            groups.setdefault(key, []).append(r)
        rows = []
        for key in sorted(groups, key=functools.cmp_to_key(lambda a, b: _cmp_tuple(a, b))):
            rows.extend(self.sort_rows(groups[key], rel, window.order)[: window.k])
        return Relation(rel.columns, rows, rel.views, rel.scores, rel.warnings)


def _where_refs(expr) -> list:
    out = []
    for node in ast.walk(expr):
        if isinstance(node, ast.ColumnRef):
            out.append(node)
    # column references inside IN subqueries belong to those subqueries
    inner = set()
    for node in ast.walk(expr):
        if isinstance(node, ast.InPredicate) and not isinstance(node.source, tuple):
            inner.update(id(n) for n in ast.walk(node.source) if isinstance(n, ast.ColumnRef))
    return [r for r in out if id(r) not in inner]


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _compare(op: str, a, b):
    if a is None or b is None:
        return None
    if _is_num(a) != _is_num(b) or (isinstance(a, str) != isinstance(b, str)):
        raise TypeMismatch(f"cannot compare {a!r} with {b!r}")
    if op == "=":
        return a == b
    if op == "!=":
        return a != b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    raise TypeMismatch(f"unknown operator {op}")


def _cmp_values(x, y, descending: bool) -> int:
    # NULLs sort last in either direction
    if x is None or y is None:
        if x is None and y is None:
            return 0
        return 1 if x is None else -1
    if _is_num(x) != _is_num(y):
        raise TypeMismatch(f"cannot order {x!r} against {y!r}")
    c = (x > y) - (x < y)
    return -c if descending else c


def _cmp_tuple(a: tuple, b: tuple) -> int:
    for x, y in zip(a, b):
        c = _cmp_values(x, y, False)
        if c:
            return c
    return 0


def sql_eval(catalog, statement, *, tie_mode: str = "id", seed: int = 0) -> Relation:
    """Evaluate a plain SQL-subset statement (text or tree) against a catalog."""
    if isinstance(statement, str):
        from shift.shiftql.parser import parse

        statement = parse(statement)
    return Evaluator(catalog, tie_mode=tie_mode, seed=seed).run(statement)

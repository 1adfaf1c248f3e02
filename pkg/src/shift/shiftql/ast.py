"""Query tree node types.

Nodes are frozen dataclasses, so structurally equal trees compare equal and
can be used as dictionary keys (the engine memoizes sub-results by node).
"""

from __future__ import annotations

from dataclasses import dataclass, fields, is_dataclass
from typing import Any, Union


@dataclass(frozen=True)
class ColumnRef:
    name: str
    qualifier: str | None = None


@dataclass(frozen=True)
class Star:
    pass


@dataclass(frozen=True)
class Literal:
    value: Any


@dataclass(frozen=True)
class Compare:
    op: str
    left: Any
    right: Any


@dataclass(frozen=True)
class BoolOp:
    op: str  # "AND" | "OR"
    operands: tuple


@dataclass(frozen=True)
class Not:
    operand: Any


@dataclass(frozen=True)
class InPredicate:
    expr: Any
    source: Any  # query node, NamedRef, or tuple of Literal
    negated: bool = False


@dataclass(frozen=True)
class IsNull:
    expr: Any
    negated: bool = False


@dataclass(frozen=True)
class TableRef:
    name: str
    alias: str | None = None


@dataclass(frozen=True)
class SubquerySource:
    query: Any
    alias: str | None = None


@dataclass(frozen=True)
class ScoringCall:
    name: str
    args: tuple = ()  # ((key, value), ...)

    def kwargs(self) -> dict:
        return dict(self.args)


@dataclass(frozen=True)
class OrderItem:
    expr: Any  # ColumnRef | ScoringCall
    descending: bool = False


@dataclass(frozen=True)
class WindowRank:
    """Top-``k`` rows per group, the desugared form of RETRIEVE."""

    k: int
    group_by: tuple
    order: tuple


@dataclass(frozen=True)
class SqlFilter:
    columns: tuple
    sources: tuple
    where: Any = None
    order_by: tuple = ()
    limit: int | None = None
    window: WindowRank | None = None


@dataclass(frozen=True)
class ProxyScoringView:
    inner: SqlFilter
    algorithm: ScoringCall
    descending: bool
    limit: int
    test_reader: str | None = None
    train_reader: str | None = None
    with_readers: tuple = ()


@dataclass(frozen=True)
class DatasetSimilarityView:
    inner: SqlFilter
    metric: ScoringCall
    descending: bool
    limit: int
    target: str | None = None


@dataclass(frozen=True)
class SetOp:
    op: str
    left: Any
    right: Any


@dataclass(frozen=True)
class Nested:
    alias: str
    body: Any


@dataclass(frozen=True)
class NamedRef:
    name: str


@dataclass(frozen=True)
class Query:
    """Root of a parsed script.

    ``bindings`` holds named definitions that the root refers to by name
    (``NOT IN Q1``, ``FROM Q1``) without inlining them.
    """

    root: Any
    bindings: tuple = ()

    def binding_map(self) -> dict:
        return dict(self.bindings)


QueryNode = Union[SqlFilter, ProxyScoringView, DatasetSimilarityView, SetOp, Nested, NamedRef]


def walk(node):
    """Yield every node of a tree in pre-order."""
    yield node
    if isinstance(node, tuple):
        for item in node:
            yield from walk(item)
    elif is_dataclass(node):
        for f in fields(node):
            value = getattr(node, f.name)
            if isinstance(value, (tuple, list)) or is_dataclass(value):
                yield from walk(value)


def to_json(node) -> Any:
    """JSON-friendly encoding used by the HTTP service and golden files."""
    if isinstance(node, tuple):
        return [to_json(x) for x in node]
    if is_dataclass(node):
        out = {"node": type(node).__name__}
        for f in fields(node):
            out[f.name] = to_json(getattr(node, f.name))
        return out
    return node

"""Canonical pretty-printer: ``parse(to_text(parse(t))) == parse(t)``."""

from __future__ import annotations

from shift.shiftql import ast
from shift.shiftql.lexer import KEYWORDS


def _literal(value) -> str:
    if value is None:
        return "NULL"
    if value is True:
        return "TRUE"
    if value is False:
        return "FALSE"
    if isinstance(value, str):
        return "'" + value.replace("'", "''") + "'"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _arg(value) -> str:
    if isinstance(value, str) and value.isidentifier() and value.upper() not in KEYWORDS:
        return value
    return _literal(value)


def _column(col) -> str:
    if isinstance(col, ast.Star):
        return "*"
    return col.name if col.qualifier is None else f"{col.qualifier}.{col.name}"


def _call(call: ast.ScoringCall) -> str:
    if not call.args:
        return call.name
    return f"{call.name}(" + ", ".join(f"{k}={_arg(v)}" for k, v in call.args) + ")"


def _direction(desc: bool) -> str:
    return "DESC" if desc else "ASC"


def expr_text(node) -> str:
    if isinstance(node, ast.ColumnRef):
        return _column(node)
    if isinstance(node, ast.Literal):
        return _literal(node.value)
    if isinstance(node, ast.Compare):
        return f"{expr_text(node.left)} {node.op} {expr_text(node.right)}"
    if isinstance(node, ast.BoolOp):
        parts = []
        for operand in node.operands:
            text = expr_text(operand)
            parts.append(f"({text})" if isinstance(operand, ast.BoolOp) else text)
        return f" {node.op} ".join(parts)
    if isinstance(node, ast.Not):
        inner = expr_text(node.operand)
        return f"NOT ({inner})"
    if isinstance(node, ast.IsNull):
        return f"{expr_text(node.expr)} IS {'NOT ' if node.negated else ''}NULL"
    if isinstance(node, ast.InPredicate):
        op = "NOT IN" if node.negated else "IN"
        src = node.source
        if isinstance(src, tuple):
            body = "(" + ", ".join(_literal(v.value) for v in src) + ")"
        elif isinstance(src, ast.NamedRef):
            body = src.name
        elif isinstance(src, ast.Nested):
            body = f"({query_text(src.body)}) {src.alias}"
        else:
            body = f"({query_text(src)})"
        return f"{expr_text(node.expr)} {op} {body}"
    raise TypeError(f"not an expression node: {node!r}")


def _source(src) -> str:
    if isinstance(src, ast.TableRef):
        return src.name if src.alias is None else f"{src.name} AS {src.alias}"
    text = f"({query_text(src.query)})"
    return text if src.alias is None else f"{text} AS {src.alias}"


def _select(f: ast.SqlFilter) -> list[str]:
    lines = ["SELECT " + ", ".join(_column(c) for c in f.columns)]
    lines.append("FROM " + " NATURAL JOIN ".join(_source(s) for s in f.sources))
    if f.where is not None:
        lines.append("WHERE " + expr_text(f.where))
    if f.window is not None:
        w = f.window
        item = w.order[0]
        lines.append(
            f"RETRIEVE {w.k} GRP " + ", ".join(_column(g) for g in w.group_by)
            + f" ORD {_column(item.expr)} {_direction(item.descending)}"
        )
    return lines


def _order_item(item: ast.OrderItem) -> str:
    expr = _call(item.expr) if isinstance(item.expr, ast.ScoringCall) else _column(item.expr)
    return f"{expr} {_direction(item.descending)}"


def query_text(node) -> str:
    if isinstance(node, ast.SqlFilter):
        lines = _select(node)
        if node.order_by:
            lines.append("ORDER BY " + ", ".join(_order_item(i) for i in node.order_by))
        if node.limit is not None:
            lines.append(f"LIMIT {node.limit}")
        return "\n".join(lines)
    if isinstance(node, ast.ProxyScoringView):
        lines = _select(node.inner)
        lines.append(f"ORDER BY {_call(node.algorithm)} {_direction(node.descending)} LIMIT {node.limit}")
        if node.test_reader is not None:
            lines.append(f"TESTED ON {node.test_reader}")
        if node.train_reader is not None:
            lines.append(f"TRAINED ON {node.train_reader}")
        if node.with_readers:
            lines.append("WITH " + ", ".join(node.with_readers))
        return "\n".join(lines)
    if isinstance(node, ast.DatasetSimilarityView):
        lines = _select(node.inner)
        lines.append(f"ORDER BY {_call(node.metric)} {_direction(node.descending)} LIMIT {node.limit}")
        if node.target is not None:
            lines.append(f"TESTED AGAINST {node.target}")
        return "\n".join(lines)
    if isinstance(node, ast.SetOp):
        return f"{_operand(node.left)}\n{node.op}\n{_operand(node.right)}"
    if isinstance(node, ast.Nested):
        return f"({query_text(node.body)}) {node.alias}"
    if isinstance(node, ast.NamedRef):
        return node.name
    raise TypeError(f"not a query node: {node!r}")


def _operand(node) -> str:
    if isinstance(node, (ast.Nested, ast.NamedRef)):
        return query_text(node)
    return f"({query_text(node)})"


def to_text(query: ast.Query) -> str:
    """Render a query tree as canonical ShiftQL text."""
    parts = [f"{name} :=\n{query_text(body)};" for name, body in query.bindings]
    parts.append(query_text(query.root))
    return "\n".join(parts)

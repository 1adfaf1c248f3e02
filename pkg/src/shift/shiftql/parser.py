"""Recursive-descent parser producing :class:`shift.shiftql.ast.Query` trees.

The grammar is documented in ``docs/grammar.ebnf``.
"""

from __future__ import annotations

from shift.errors import ShiftQLSyntaxError, UnknownKeyword
from shift.registry import DATASIM_METRICS, SCORING_NAMES
from shift.shiftql import ast
from shift.shiftql.lexer import Token, tokenize

_COMPARE_OPS = ("=", "!=", "<", "<=", ">", ">=")
_READER_CLAUSES = ("TESTED", "TRAINED", "WITH")


class Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0
        self.definitions: dict[str, object] = {}
        self.definition_order: list[str] = []

    # -- token helpers ----------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, offset: int = 1) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tok
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def error(self, message: str, tok: Token | None = None):
        tok = tok or self.tok
        shown = tok.text or "end of input"
        if tok.kind == "IDENT" and tok.text.isupper() and len(tok.text) > 1:
            return UnknownKeyword(f"unknown keyword {tok.text!r}; {message}", tok.line, tok.column, tok.text)
        return ShiftQLSyntaxError(f"{message}, found {shown!r}", tok.line, tok.column, tok.text)

    def is_kw(self, *words: str) -> bool:
        return self.tok.kind == "KW" and self.tok.value in words

    def is_op(self, *ops: str) -> bool:
        return self.tok.kind == "OP" and self.tok.value in ops

    def accept_kw(self, word: str) -> bool:
        if self.is_kw(word):
            self.advance()
            return True
        return False

    def accept_op(self, op: str) -> bool:
        if self.is_op(op):
            self.advance()
            return True
        return False

    def expect_kw(self, word: str) -> Token:
        if not self.is_kw(word):
            raise self.error(f"expected {word}")
        return self.advance()

    def expect_op(self, op: str) -> Token:
        if not self.is_op(op):
            raise self.error(f"expected {op!r}")
        return self.advance()

    def expect_ident(self, what: str = "identifier") -> str:
        if self.tok.kind != "IDENT":
            raise self.error(f"expected {what}")
        return self.advance().text

    def expect_int(self, what: str) -> int:
        tok = self.tok
        if tok.kind != "NUMBER" or not isinstance(tok.value, int) or tok.value < 0:
            raise self.error(f"expected a non-negative integer {what}")
        self.advance()
        return tok.value

    # -- script level -----------------------------------------------------

    def parse_script(self) -> ast.Query:
        root = None
        if self.tok.kind == "EOF":
            raise self.error("expected a query")
        while self.tok.kind != "EOF":
            if self.tok.kind == "IDENT" and self.peek().kind == "OP" and self.peek().value == ":=":
                name = self.advance().text
                self.advance()
                body = self.parse_query()
                self._define(name, body)
                root = ("def", name, body)
            elif self.is_kw("CREATE"):
                name, body = self.parse_create()
                self._define(name, body)
                root = ("def", name, body)
            else:
                root = ("query", None, self.parse_query())
            while self.accept_op(";"):
                pass
        node = root[2]
        return ast.Query(node, self._bindings_for(node))

    def _define(self, name: str, body) -> None:
        if name not in self.definitions:
            self.definition_order.append(name)
        self.definitions[name] = body

    def _bindings_for(self, root) -> tuple:
        """Definitions referenced by name from ``root``, transitively."""
        needed: list[str] = []
        pending = [root]
        while pending:
            node = pending.pop()
            for sub in ast.walk(node):
                name = None
                if isinstance(sub, ast.NamedRef):
                    name = sub.name
                elif isinstance(sub, ast.TableRef):
                    name = sub.name
                if name in self.definitions and name not in needed:
                    needed.append(name)
                    pending.append(self.definitions[name])
        return tuple((n, self.definitions[n]) for n in self.definition_order if n in needed)

    def parse_create(self):
        self.expect_kw("CREATE")
        if self.accept_kw("PROXY"):
            self.expect_kw("SCORING")
            want = ast.ProxyScoringView
        elif self.accept_kw("DATASET"):
            self.expect_kw("SIMILARITY")
            want = ast.DatasetSimilarityView
        else:
            raise self.error("expected PROXY SCORING or DATASET SIMILARITY")
        self.expect_kw("VIEW")
        name_tok = self.tok
        name = self.expect_ident("view name")
        self.accept_kw("AS")
        body = self.parse_query()
        if not isinstance(body, want):
            kind = "proxy scoring" if want is ast.ProxyScoringView else "dataset similarity"
            raise self.error(f"view {name} is not a {kind} view", name_tok)
        return name, body

    # -- queries ----------------------------------------------------------

    def parse_query(self):
        node = self.parse_term()
        while self.accept_kw("UNION"):
            node = ast.SetOp("UNION", node, self.parse_term())
        return node

    def parse_term(self):
        if self.is_kw("SELECT"):
            return self.parse_select()
        if self.accept_op("("):
            inner = self.parse_query()
            self.expect_op(")")
            alias = self.parse_alias()
            return inner if alias is None else ast.Nested(alias, inner)
        if self.tok.kind == "IDENT":
            tok = self.tok
            name = self.advance().text
            if name in self.definitions:
                return ast.Nested(name, self.definitions[name])
            if tok.text.isupper() and len(tok.text) > 2 and not any(c.isdigit() for c in tok.text):
                raise self.error("expected SELECT, '(' or a query name", tok)
            return ast.NamedRef(name)
        raise self.error("expected SELECT, '(' or a query name")

    def parse_alias(self) -> str | None:
        if self.accept_kw("AS"):
            return self.expect_ident("alias")
        if self.tok.kind == "IDENT" and not (self.peek().kind == "OP" and self.peek().value == ":="):
            return self.advance().text
        return None

    def parse_select(self):
        self.expect_kw("SELECT")
        columns = self.parse_columns()
        self.expect_kw("FROM")
        sources = self.parse_sources()
        where = self.parse_expr() if self.accept_kw("WHERE") else None
        window = self.parse_retrieve() if self.is_kw("RETRIEVE") else None
        tagged = False
        if self.tok.kind == "TAG":
            if self.tok.value != "<SHIFT>":
                raise self.error("unexpected closing tag")
            self.advance()
            tagged = True
        order_tok = self.tok
        order_by = self.parse_order_by() if self.is_kw("ORDER") else ()
        limit = None
        if self.accept_kw("LIMIT"):
            limit = self.expect_int("after LIMIT")
        readers = self.parse_reader_clauses()
        if tagged or self.tok.kind == "TAG":
            if self.tok.kind != "TAG" or self.tok.value != "</SHIFT>":
                raise self.error("expected </SHIFT>")
            self.advance()
        inner = ast.SqlFilter(tuple(columns), tuple(sources), where, (), None, window)
        calls = [item for item in order_by if isinstance(item.expr, ast.ScoringCall)]
        if not calls:
            if readers:
                raise self.error("reader clauses need ORDER BY a scoring algorithm", order_tok)
            return ast.SqlFilter(tuple(columns), tuple(sources), where, tuple(order_by), limit, window)
        if len(order_by) != 1:
            raise self.error("a scoring view orders by exactly one scoring algorithm", order_tok)
        if limit is None:
            raise self.error("scoring views need LIMIT K")
        call = calls[0].expr
        descending = order_by[0].descending
        if call.name in DATASIM_METRICS or "AGAINST" in readers:
            if "TRAINED" in readers or "WITH" in readers:
                raise self.error("dataset similarity views take a single target reader", order_tok)
            target = readers.get("AGAINST", readers.get("TESTED"))
            return ast.DatasetSimilarityView(inner, call, descending, limit, target)
        return ast.ProxyScoringView(
            inner,
            call,
            descending,
            limit,
            readers.get("TESTED"),
            readers.get("TRAINED"),
            tuple(readers.get("WITH", ())),
        )

    def parse_reader_clauses(self) -> dict:
        found: dict = {}
        while self.is_kw(*_READER_CLAUSES):
            tok = self.advance()
            if tok.value == "TESTED":
                if self.accept_kw("AGAINST"):
                    key = "AGAINST"
                else:
                    self.expect_kw("ON")
                    key = "TESTED"
            elif tok.value == "TRAINED":
                self.expect_kw("ON")
                key = "TRAINED"
            else:
                key = "WITH"
            if key in found or (key in ("AGAINST", "TESTED") and ({"AGAINST", "TESTED"} & set(found))):
                raise self.error("duplicate reader clause", tok)
            if key == "WITH":
                names = [self.expect_ident("reader name")]
                while self.accept_op(","):
                    names.append(self.expect_ident("reader name"))
                found[key] = names
            else:
                found[key] = self.expect_ident("reader name")
        return found

    def parse_columns(self) -> list:
        if self.accept_op("*"):
            return [ast.Star()]
        cols = [self.parse_column()]
        while self.accept_op(","):
            cols.append(self.parse_column())
        return cols

    def parse_column(self) -> ast.ColumnRef:
        first = self.expect_ident("column name")
        if self.accept_op("."):
            return ast.ColumnRef(self.expect_ident("column name"), first)
        return ast.ColumnRef(first)

    def parse_sources(self) -> list:
        sources = [self.parse_source()]
        while self.is_kw("NATURAL"):
            self.advance()
            self.expect_kw("JOIN")
            sources.append(self.parse_source())
        return sources

    def parse_source(self):
        if self.accept_op("("):
            inner = self.parse_query()
            self.expect_op(")")
            return ast.SubquerySource(inner, self.parse_alias())
        name = self.expect_ident("view name")
        alias = None
        if self.accept_kw("AS"):
            alias = self.expect_ident("alias")
        return ast.TableRef(name, alias)

    def parse_retrieve(self) -> ast.WindowRank:
        self.expect_kw("RETRIEVE")
        k = self.expect_int("after RETRIEVE")
        self.expect_kw("GRP")
        groups = [self.parse_column()]
        while self.accept_op(","):
            groups.append(self.parse_column())
        self.expect_kw("ORD")
        col = self.parse_column()
        descending = self.parse_direction()
        return ast.WindowRank(k, tuple(groups), (ast.OrderItem(col, descending),))

    def parse_direction(self) -> bool:
        if self.accept_kw("DESC"):
            return True
        self.accept_kw("ASC")
        return False

    def parse_order_by(self) -> list:
        self.expect_kw("ORDER")
        self.expect_kw("BY")
        items = [self.parse_order_item()]
        while self.accept_op(","):
            items.append(self.parse_order_item())
        return items

    def parse_order_item(self) -> ast.OrderItem:
        if self.tok.kind != "IDENT":
            raise self.error("expected a column or scoring algorithm after ORDER BY")
        if self.peek().kind == "OP" and self.peek().value == "(":
            expr = self.parse_call()
        elif self.tok.text in SCORING_NAMES and not (self.peek().kind == "OP" and self.peek().value == "."):
            expr = ast.ScoringCall(self.advance().text, ())
        else:
            expr = self.parse_column()
        return ast.OrderItem(expr, self.parse_direction())

    def parse_call(self) -> ast.ScoringCall:
        name = self.expect_ident("scoring algorithm")
        self.expect_op("(")
        args = []
        if not self.is_op(")"):
            while True:
                key = self.expect_ident("argument name")
                self.expect_op("=")
                args.append((key, self.parse_arg_value()))
                if not self.accept_op(","):
                    break
        self.expect_op(")")
        keys = [k for k, _ in args]
        if len(set(keys)) != len(keys):
            raise self.error("duplicate scoring argument")
        return ast.ScoringCall(name, tuple(args))

    def parse_arg_value(self):
        tok = self.tok
        if tok.kind in ("NUMBER", "STRING"):
            self.advance()
            return tok.value
        if self.is_op("-") and self.peek().kind == "NUMBER":
            self.advance()
            return -self.advance().value
        if tok.kind == "IDENT":
            self.advance()
            return tok.text
        if self.is_kw("TRUE", "FALSE"):
            self.advance()
            return tok.value == "TRUE"
        raise self.error("expected an argument value")

    # -- expressions ------------------------------------------------------

    def parse_expr(self):
        return self.parse_or()

    def parse_or(self):
        items = [self.parse_and()]
        while self.accept_kw("OR"):
            items.append(self.parse_and())
        return items[0] if len(items) == 1 else ast.BoolOp("OR", tuple(_flatten("OR", items)))

    def parse_and(self):
        items = [self.parse_not()]
        while self.accept_kw("AND"):
            items.append(self.parse_not())
        return items[0] if len(items) == 1 else ast.BoolOp("AND", tuple(_flatten("AND", items)))

    def parse_not(self):
        if self.accept_kw("NOT"):
            return ast.Not(self.parse_not())
        return self.parse_predicate()

    def parse_predicate(self):
        if self.is_op("("):
            self.advance()
            inner = self.parse_expr()
            self.expect_op(")")
            return inner
        left = self.parse_operand()
        if self.is_op(*_COMPARE_OPS):
            op = self.advance().value
            return ast.Compare(op, left, self.parse_operand())
        negated = False
        if self.is_kw("NOT") and self.peek().kind == "KW" and self.peek().value == "IN":
            self.advance()
            negated = True
        if self.accept_kw("IN"):
            return ast.InPredicate(left, self.parse_in_source(), negated)
        if self.accept_kw("IS"):
            neg = self.accept_kw("NOT")
            self.expect_kw("NULL")
            return ast.IsNull(left, neg)
        raise self.error("expected a comparison, IN or IS")

    def parse_in_source(self):
        if self.tok.kind == "IDENT":
            return ast.NamedRef(self.advance().text)
        self.expect_op("(")
        if self.is_kw("SELECT") or self.is_op("("):
            inner = self.parse_query()
            self.expect_op(")")
            alias = self.parse_alias()
            return inner if alias is None else ast.Nested(alias, inner)
        values = [self.parse_literal()]
        while self.accept_op(","):
            values.append(self.parse_literal())
        self.expect_op(")")
        return tuple(values)

    def parse_operand(self):
        if self.tok.kind == "IDENT":
            return self.parse_column()
        return self.parse_literal()

    def parse_literal(self) -> ast.Literal:
        tok = self.tok
        if tok.kind in ("NUMBER", "STRING"):
            self.advance()
            return ast.Literal(tok.value)
        if self.is_op("-") and self.peek().kind == "NUMBER":
            self.advance()
            return ast.Literal(-self.advance().value)
        if self.is_kw("TRUE", "FALSE"):
            self.advance()
            return ast.Literal(tok.value == "TRUE")
        if self.is_kw("NULL"):
            self.advance()
            return ast.Literal(None)
        raise self.error("expected a column or literal")


def _flatten(op: str, items: list) -> list:
    out = []
    for item in items:
        if isinstance(item, ast.BoolOp) and item.op == op:
            out.extend(item.operands)
        else:
            out.append(item)
    return out


def parse(text: str) -> ast.Query:
    """Parse a ShiftQL script into a query tree."""
    return Parser(text).parse_script()

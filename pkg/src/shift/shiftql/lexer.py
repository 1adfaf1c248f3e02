"""Tokenizer for ShiftQL."""

from __future__ import annotations

import re
from dataclasses import dataclass

from shift.errors import ShiftQLSyntaxError

KEYWORDS = frozenset(
    """
    SELECT FROM WHERE ORDER BY ASC DESC LIMIT UNION AND OR NOT IN IS NULL TRUE FALSE
    AS NATURAL JOIN CREATE PROXY SCORING DATASET SIMILARITY VIEW TESTED TRAINED ON
    AGAINST WITH RETRIEVE GRP ORD
    """.split()
)

_SUFFIX = {"K": 1_000, "M": 1_000_000}


@dataclass(frozen=True)
class Token:
    kind: str  # KW, IDENT, NUMBER, STRING, OP, TAG, EOF
    text: str
    value: object
    line: int
    column: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>--[^\n]*)
  | (?P<tag></?SHIFT>)
  | (?P<number>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)(?P<suffix>[A-Za-z_]\w*)?
  | (?P<string>'(?:[^']|'')*')
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>:=|==|!=|<>|<=|>=|[=<>(),.;*\-])
    """,
    re.VERBOSE | re.IGNORECASE,
)


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            if text[pos] == "'":
                raise ShiftQLSyntaxError("unterminated string literal", line, col, text[pos])
            raise ShiftQLSyntaxError(f"unexpected character {text[pos]!r}", line, col, text[pos])
        kind = m.lastgroup if m.lastgroup != "suffix" else "number"
        raw = m.group(0)
        if kind == "number":
            suffix = m.group("suffix")
            value: object = float(m.group("number")) if re.search(r"[.eE]", m.group("number")) else int(m.group("number"))
            if suffix:
                mult = _SUFFIX.get(suffix.upper()) if len(suffix) == 1 else None
                if mult is None:
                    raise ShiftQLSyntaxError(f"bad numeric suffix {suffix!r}", line, col, raw)
                value = value * mult
            tokens.append(Token("NUMBER", raw, value, line, col))
        elif kind == "string":
            tokens.append(Token("STRING", raw, raw[1:-1].replace("''", "'"), line, col))
        elif kind == "ident":
            upper = raw.upper()
            if upper in KEYWORDS:
                tokens.append(Token("KW", raw, upper, line, col))
            else:
                tokens.append(Token("IDENT", raw, raw, line, col))
        elif kind == "op":
            value = {"==": "=", "<>": "!="}.get(raw, raw)
            tokens.append(Token("OP", raw, value, line, col))
        elif kind == "tag":
            tokens.append(Token("TAG", raw, raw.upper(), line, col))
        newlines = raw.count("\n")
        if newlines:
            line += newlines
            line_start = pos + raw.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("EOF", "", None, line, pos - line_start + 1))
    return tokens

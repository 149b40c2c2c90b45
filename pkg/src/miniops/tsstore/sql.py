"""Mini-SQL: the query grammar of the metric store.

    query     = "SELECT" agg "(" "value" ")" "FROM" metric_name
                "WHERE" cond { "AND" cond } [ "GROUP BY" groupings ]
    agg       = "avg" | "min" | "max" | "sum" | "count" | "last"
    cond      = tag "=" string  |  "ts" ( ">=" | "<" ) int
    groupings = "time(" int unit ")" { "," tag }
    unit      = "s" | "m" | "h"

Metric names are double-quoted, strings single-quoted, keywords case
insensitive. Every query must carry exactly one ``ts >=`` and one
``ts <`` bound, which define the half-open range [from, to).

Errors report a 1-based column. ``print_query`` renders the canonical
form; parse(print_query(parse(text))) is a fixed point.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

AGGREGATES = ("avg", "min", "max", "sum", "count", "last")

_UNIT_MS = {"s": 1, "m": 60, "h": 3600}


class ParseError(ValueError):
    """Syntax or semantic error, carrying the 1-based column position."""

    def __init__(self, message: str, column: int):
        super().__init__(f"{message} (column {column})")
        self.column = column
        self.reason = message


@dataclass(frozen=True)
class Query:
    """Canonical parsed query over the metric store."""

    metric: str
    agg: str
    from_ms: int
    to_ms: int
    filters: tuple[tuple[str, str], ...] = ()
    bucket_s: Optional[int] = None
    group_by: tuple[str, ...] = ()

    def validate(self) -> None:
        if self.agg not in AGGREGATES:
            raise ValueError(f"unknown aggregate {self.agg!r}")
        if self.from_ms >= self.to_ms:
            raise ValueError(f"empty time range [{self.from_ms}, {self.to_ms})")
        if self.bucket_s is not None and self.bucket_s <= 0:
            raise ValueError("bucket width must be positive")
        if self.group_by and self.bucket_s is None:
            raise ValueError("group-by tags require a time() bucket")


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<dqstring>"(?:[^"\\]|\\.)*")
  | (?P<string>'(?:[^'\\]|\\.)*')
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.]*)
  | (?P<op>>=|<|=|\(|\)|,)
    """,
    re.VERBOSE,
)


@dataclass
class _Token:
    kind: str  # ident | string | dqstring | int | op | eof
    text: str
    column: int  # 1-based


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos + 1)
        if match.lastgroup != "ws":
            tokens.append(_Token(match.lastgroup, match.group(), pos + 1))
        pos = match.end()
    tokens.append(_Token("eof", "", len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    @property
    def current(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def fail(self, message: str, token: Optional[_Token] = None):
        token = token or self.current
        raise ParseError(message, token.column)

    def expect_keyword(self, word: str) -> _Token:
        token = self.current
        if token.kind != "ident" or token.text.lower() != word.lower():
            self.fail(f"expected {word}", token)
        return self.advance()

    def expect_op(self, op: str) -> _Token:
        token = self.current
        if token.kind != "op" or token.text != op:
            self.fail(f"expected {op!r}", token)
        return self.advance()

    def at_keyword(self, word: str) -> bool:
        token = self.current
        return token.kind == "ident" and token.text.lower() == word.lower()

    # -- grammar ----------------------------------------------------------

    def parse(self) -> Query:
        self.expect_keyword("SELECT")
        agg_token = self.current
        if agg_token.kind != "ident":
            self.fail("expected aggregate name", agg_token)
        agg = agg_token.text.lower()
        if agg not in AGGREGATES:
            self.fail(f"unknown aggregate {agg_token.text!r}", agg_token)
        self.advance()
        self.expect_op("(")
        value_token = self.current
        if value_token.kind != "ident" or value_token.text.lower() != "value":
            self.fail("expected value", value_token)
        self.advance()
        self.expect_op(")")

        self.expect_keyword("FROM")
        metric_token = self.current
        if metric_token.kind != "dqstring":
            self.fail("expected double-quoted metric name", metric_token)
        metric = _unquote(metric_token.text)
        if not metric:
            self.fail("metric name must be non-empty", metric_token)
        self.advance()

        self.expect_keyword("WHERE")
        filters: list[tuple[str, str]] = []
        from_ms: Optional[int] = None
        to_ms: Optional[int] = None
        while True:
            cond_token = self.current
            if cond_token.kind != "ident":
                self.fail("expected condition", cond_token)
            if cond_token.text.lower() == "ts":
                self.advance()
                op_token = self.current
                if op_token.kind != "op" or op_token.text not in (">=", "<"):
                    self.fail("expected >= or < after ts", op_token)
                self.advance()
                int_token = self.current
                if int_token.kind != "int":
                    self.fail("expected integer timestamp", int_token)
                value = int(int_token.text)
                if op_token.text == ">=":
                    if from_ms is not None:
                        self.fail("duplicate ts >= bound", cond_token)
                    from_ms = value
                else:
                    if to_ms is not None:
                        self.fail("duplicate ts < bound", cond_token)
                    to_ms = value
                self.advance()
            else:
                tag = cond_token.text
                self.advance()
                self.expect_op("=")
                str_token = self.current
                if str_token.kind != "string":
                    self.fail("expected single-quoted string", str_token)
                filters.append((tag, _unquote(str_token.text)))
                self.advance()
            if self.at_keyword("AND"):
                self.advance()
                continue
            break

        bucket_s: Optional[int] = None
        group_by: list[str] = []
        if self.at_keyword("GROUP"):
            self.advance()
            self.expect_keyword("BY")
            time_token = self.current
            if time_token.kind != "ident" or time_token.text.lower() != "time":
                self.fail("expected time(...)", time_token)
            self.advance()
            self.expect_op("(")
            int_token = self.current
            if int_token.kind != "int":
                self.fail("expected integer bucket width", int_token)
            width = int(int_token.text)
            self.advance()
            unit_token = self.current
            if unit_token.kind != "ident" or unit_token.text.lower() not in _UNIT_MS:
                self.fail("expected unit s, m or h", unit_token)
            bucket_s = width * _UNIT_MS[unit_token.text.lower()]
            if bucket_s <= 0:
                self.fail("bucket width must be positive", int_token)
            self.advance()
            self.expect_op(")")
            while self.current.kind == "op" and self.current.text == ",":
                self.advance()
                tag_token = self.current
                if tag_token.kind != "ident":
                    self.fail("expected tag name", tag_token)
                group_by.append(tag_token.text)
                self.advance()

        end_token = self.current
        if end_token.kind != "eof":
            self.fail("unexpected trailing input", end_token)
        if from_ms is None:
            self.fail("missing ts >= lower bound", end_token)
        if to_ms is None:
            self.fail("missing ts < upper bound", end_token)
        if from_ms >= to_ms:
            self.fail(f"empty time range [{from_ms}, {to_ms})", end_token)
        return Query(metric, agg, from_ms, to_ms, tuple(filters), bucket_s, tuple(group_by))


def _unquote(token_text: str) -> str:
    body = token_text[1:-1]
    out = []
    i = 0
    while i < len(body):
        if body[i] == "\\" and i + 1 < len(body):
            out.append(body[i + 1])
            i += 2
        else:
            out.append(body[i])
            i += 1
    return "".join(out)


def _quote(text: str, quote: str) -> str:
    return quote + text.replace("\\", "\\\\").replace(quote, "\\" + quote) + quote


def parse_query(text: str) -> Query:
    """Parse mini-SQL text into its canonical Query."""
    if not text or not text.strip():
        raise ParseError("empty query", 1)
    return _Parser(text).parse()


def print_query(q: Query) -> str:
    """Render the canonical mini-SQL text for a Query."""
    parts = [f"SELECT {q.agg}(value) FROM {_quote(q.metric, chr(34))} WHERE"]
    conds = [f"{k} = {_quote(v, chr(39))}" for k, v in q.filters]
    conds.append(f"ts >= {q.from_ms}")
    conds.append(f"ts < {q.to_ms}")
    parts.append(" AND ".join(conds))
    if q.bucket_s is not None:
        groupings = [f"time({q.bucket_s}s)"] + list(q.group_by)
        parts.append("GROUP BY " + ", ".join(groupings))
    return " ".join(parts)

"""Tokenizer and recursive-descent parser for the supported SQL subset.

Double-quoted tokens are treated as string literals, matching how SPIDER
gold queries quote values ("wyoming"); identifiers are bare words.
Identifier case is preserved here so validation can distinguish exact from
case-folded schema matches; case folding happens during canonicalization.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import SqlSyntaxError
from .nodes import (
    AGGREGATES,
    Agg,
    And,
    Arith,
    Between,
    Column,
    Comparison,
    Expr,
    InList,
    InQuery,
    Join,
    Like,
    Literal,
    Not,
    Or,
    OrderItem,
    Query,
    ScalarQuery,
    SelectCore,
    SelectItem,
    Source,
    Star,
    SubquerySource,
    TableSource,
)

_KEYWORDS = {
    "select", "distinct", "from", "as", "join", "inner", "on", "where",
    "and", "or", "not", "in", "between", "like", "group", "by", "having",
    "order", "asc", "desc", "limit", "union", "all", "intersect", "except",
    "null",
}
_AGG_FOLDED = {name.lower() for name in AGGREGATES}

_TOKEN_RE = re.compile(
    r"""
      (?P<ws>\s+)
    | (?P<string>'(?:[^']|'')*'|"(?:[^"]|"")*")
    | (?P<number>\d+\.\d*|\.\d+|\d+)
    | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
    | (?P<op><=|>=|<>|!=|=|<|>|\+|-|\*|/)
    | (?P<punct>[(),.;])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # string | number | ident | keyword | op | punct | end
    text: str
    position: int

    @property
    def folded(self) -> str:
        return self.text.lower()


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise SqlSyntaxError(
                f"unexpected character {text[pos]!r} at offset {pos}", position=pos
            )
        pos = match.end()
        kind = match.lastgroup
        if kind == "ws":
            continue
        value = match.group()
        if kind == "ident" and value.lower() in _KEYWORDS:
            kind = "keyword"
        tokens.append(_Token(kind=kind, text=value, position=match.start()))
    tokens.append(_Token(kind="end", text="", position=len(text)))
    return tokens


def _unquote(text: str) -> str:
    quote = text[0]
    return text[1:-1].replace(quote + quote, quote)


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self._tokens = tokens
        self._pos = 0
        self._agg_depth = 0

    # -- token plumbing ----------------------------------------------------

    def _peek(self, ahead: int = 0) -> _Token:
        return self._tokens[min(self._pos + ahead, len(self._tokens) - 1)]

    def _next(self) -> _Token:
        token = self._peek()
        if token.kind != "end":
            self._pos += 1
        return token

    def _at_keyword(self, *words: str) -> bool:
        token = self._peek()
        return token.kind == "keyword" and token.folded in words

    def _take_keyword(self, word: str) -> None:
        token = self._next()
        if token.kind != "keyword" or token.folded != word:
            raise SqlSyntaxError(
                f"expected {word.upper()} but found {token.text or 'end of input'!r}",
                position=token.position,
            )

    def _take_punct(self, text: str) -> None:
        token = self._next()
        if token.kind != "punct" or token.text != text:
            raise SqlSyntaxError(
                f"expected {text!r} but found {token.text or 'end of input'!r}",
                position=token.position,
            )

    def _take_ident(self, what: str) -> str:
        token = self._next()
        if token.kind != "ident":
            raise SqlSyntaxError(
                f"expected {what} but found {token.text or 'end of input'!r}",
                position=token.position,
            )
        return token.text

    # -- query structure ---------------------------------------------------

    def parse_query(self) -> Query:
        core = self._select_core()
        set_op = None
        operand = None
        if self._at_keyword("union", "intersect", "except"):
            op_token = self._next()
            op = op_token.folded.upper()
            if op == "UNION" and self._at_keyword("all"):
                self._next()
                op = "UNION ALL"
            set_op = op
            operand = self.parse_query_without_tail()
        order_by: list[OrderItem] = []
        if self._at_keyword("order"):
            self._next()
            self._take_keyword("by")
            order_by.append(self._order_item())
            while self._at_punct(","):
                self._next()
                order_by.append(self._order_item())
        limit = None
        if self._at_keyword("limit"):
            self._next()
            token = self._next()
            if token.kind != "number" or "." in token.text:
                raise SqlSyntaxError(
                    f"LIMIT expects an integer, found {token.text!r}",
                    position=token.position,
                )
            limit = int(token.text)
        return Query(
            core=core,
            set_op=set_op,
            set_operand=operand,
            order_by=tuple(order_by),
            limit=limit,
        )

    def parse_query_without_tail(self) -> Query:
        """A set-operation operand: chains further set ops, no ORDER/LIMIT."""
        core = self._select_core()
        if self._at_keyword("union", "intersect", "except"):
            op = self._next().folded.upper()
            if op == "UNION" and self._at_keyword("all"):
                self._next()
                op = "UNION ALL"
            return Query(core=core, set_op=op, set_operand=self.parse_query_without_tail())
        return Query(core=core)

    def _at_punct(self, text: str) -> bool:
        token = self._peek()
        return token.kind == "punct" and token.text == text

    def _select_core(self) -> SelectCore:
        self._take_keyword("select")
        distinct = False
        if self._at_keyword("distinct"):
            self._next()
            distinct = True
        items = [self._select_item()]
        while self._at_punct(","):
            self._next()
            items.append(self._select_item())
        self._take_keyword("from")
        sources = [self._source()]
        while self._at_punct(","):
            self._next()
            sources.append(self._source())
        joins = []
        while self._at_keyword("join", "inner"):
            if self._at_keyword("inner"):
                self._next()
            self._take_keyword("join")
            source = self._source()
            self._take_keyword("on")
            joins.append(Join(source=source, condition=self._expr()))
        where = None
        if self._at_keyword("where"):
            self._next()
            where = self._expr()
        group_by: list[Expr] = []
        if self._at_keyword("group"):
            self._next()
            self._take_keyword("by")
            group_by.append(self._value())
            while self._at_punct(","):
                self._next()
                group_by.append(self._value())
        having = None
        if self._at_keyword("having"):
            self._next()
            having = self._expr()
        return SelectCore(
            items=tuple(items),
            sources=tuple(sources),
            joins=tuple(joins),
            distinct=distinct,
            where=where,
            group_by=tuple(group_by),
            having=having,
        )

    def _select_item(self) -> SelectItem:
        expr = self._value()
        alias = None
        if self._at_keyword("as"):
            self._next()
            alias = self._take_ident("select alias")
        return SelectItem(expr=expr, alias=alias)

    def _source(self) -> Source:
        if self._at_punct("("):
            self._next()
            query = self.parse_query()
            self._take_punct(")")
            alias = self._source_alias()
            return SubquerySource(query=query, alias=alias)
        name = self._take_ident("table name")
        return TableSource(name=name, alias=self._source_alias())

    def _source_alias(self) -> str | None:
        if self._at_keyword("as"):
            self._next()
            return self._take_ident("alias")
        if self._peek().kind == "ident":
            return self._next().text
        return None

    def _order_item(self) -> OrderItem:
        expr = self._value()
        descending = False
        if self._at_keyword("asc"):
            self._next()
        elif self._at_keyword("desc"):
            self._next()
            descending = True
        return OrderItem(expr=expr, descending=descending)

    # -- expressions ---------------------------------------------------------

    def _expr(self) -> Expr:
        operands = [self._and_expr()]
        while self._at_keyword("or"):
            self._next()
            operands.append(self._and_expr())
        if len(operands) == 1:
            return operands[0]
        flat: list[Expr] = []
        for op in operands:
            flat.extend(op.operands if isinstance(op, Or) else [op])
        return Or(operands=tuple(flat))

    def _and_expr(self) -> Expr:
        operands = [self._not_expr()]
        while self._at_keyword("and"):
            self._next()
            operands.append(self._not_expr())
        if len(operands) == 1:
            return operands[0]
        flat: list[Expr] = []
        for op in operands:
            flat.extend(op.operands if isinstance(op, And) else [op])
        return And(operands=tuple(flat))

    def _not_expr(self) -> Expr:
        if self._at_keyword("not"):
            self._next()
            return Not(operand=self._not_expr())
        return self._predicate()

    def _predicate(self) -> Expr:
        left = self._value()
        token = self._peek()
        if token.kind == "op" and token.text in ("=", "!=", "<>", "<", ">", "<=", ">="):
            self._next()
            op = "!=" if token.text == "<>" else token.text
            return Comparison(op=op, left=left, right=self._value())
        negated = False
        if self._at_keyword("not"):
            # only as part of NOT IN / NOT LIKE / NOT BETWEEN here
            if self._peek(1).kind == "keyword" and self._peek(1).folded in (
                "in", "like", "between",
            ):
                self._next()
                negated = True
            else:
                return left
        if self._at_keyword("like"):
            self._next()
            return Like(expr=left, pattern=self._value(), negated=negated)
        if self._at_keyword("between"):
            self._next()
            low = self._value()
            self._take_keyword("and")
            return Between(expr=left, low=low, high=self._value(), negated=negated)
        if self._at_keyword("in"):
            self._next()
            self._take_punct("(")
            if self._at_keyword("select"):
                query = self.parse_query()
                self._take_punct(")")
                return InQuery(expr=left, query=query, negated=negated)
            items = [self._value()]
            while self._at_punct(","):
                self._next()
                items.append(self._value())
            self._take_punct(")")
            return InList(expr=left, items=tuple(items), negated=negated)
        if negated:
            token = self._peek()
            raise SqlSyntaxError(
                f"expected IN, LIKE, or BETWEEN after NOT, found {token.text!r}",
                position=token.position,
            )
        return left

    def _value(self) -> Expr:
        left = self._term()
        while True:
            token = self._peek()
            if token.kind == "op" and token.text in ("+", "-"):
                self._next()
                left = Arith(op=token.text, left=left, right=self._term())
            else:
                return left

    def _term(self) -> Expr:
        left = self._factor()
        while True:
            token = self._peek()
            if token.kind == "op" and token.text in ("*", "/"):
                self._next()
                left = Arith(op=token.text, left=left, right=self._factor())
            else:
                return left

    def _factor(self) -> Expr:
        token = self._peek()
        if token.kind == "string":
            self._next()
            return Literal(kind="string", value=_unquote(token.text))
        if token.kind == "number":
            self._next()
            return Literal(kind="number", value=token.text)
        if token.kind == "op" and token.text == "-":
            if self._peek(1).kind == "number":
                self._next()
                number = self._next()
                return Literal(kind="number", value="-" + number.text)
        if token.kind == "op" and token.text == "*":
            self._next()
            return Star()
        if token.kind == "keyword" and token.folded == "null":
            self._next()
            return Literal(kind="null", value="")
        if token.kind == "punct" and token.text == "(":
            self._next()
            if self._at_keyword("select"):
                query = self.parse_query()
                self._take_punct(")")
                return ScalarQuery(query=query)
            inner = self._expr()
            self._take_punct(")")
            return inner
        if token.kind == "ident":
            if token.folded in _AGG_FOLDED and self._peek(1).kind == "punct" \
                    and self._peek(1).text == "(":
                return self._aggregate()
            return self._column()
        raise SqlSyntaxError(
            f"unexpected token {token.text or 'end of input'!r} at offset "
            f"{token.position}",
            position=token.position,
        )

    def _aggregate(self) -> Expr:
        if self._agg_depth > 0:
            token = self._peek()
            raise SqlSyntaxError(
                "aggregate functions cannot nest", position=token.position
            )
        func = self._next().text.upper()
        self._take_punct("(")
        distinct = False
        if self._at_keyword("distinct"):
            self._next()
            distinct = True
        self._agg_depth += 1
        try:
            arg = self._value()
        finally:
            self._agg_depth -= 1
        self._take_punct(")")
        return Agg(func=func, arg=arg, distinct=distinct)

    def _column(self) -> Expr:
        first = self._take_ident("column name")
        if self._at_punct("."):
            self._next()
            token = self._peek()
            if token.kind == "op" and token.text == "*":
                self._next()
                return Star(table=first)
            name = self._take_ident("column name")
            return Column(name=name, table=first)
        return Column(name=first)


def parse_sql(text: str) -> Query:
    """Parse one SELECT statement (optionally semicolon-terminated).

    Raises SqlSyntaxError, carrying the character offset, for anything
    outside the supported subset or for trailing content after the
    statement.
    """
    if not text or not text.strip():
        raise SqlSyntaxError("empty SQL text", position=0)
    tokens = _tokenize(text)
    parser = _Parser(tokens)
    first = parser._peek()
    if not (first.kind == "keyword" and first.folded == "select"):
        raise SqlSyntaxError(
            f"statement must start with SELECT, found {first.text!r}",
            position=first.position,
        )
    query = parser.parse_query()
    tail = parser._next()
    if tail.kind == "punct" and tail.text == ";":
        tail = parser._next()
    if tail.kind != "end":
        raise SqlSyntaxError(
            f"unexpected trailing content {tail.text!r} after statement",
            position=tail.position,
        )
    return query

"""Immutable AST for the supported SQL subset, plus the deterministic printer.

The subset covers what SPIDER-style gold queries use: SELECT with DISTINCT
and the five aggregates, FROM/JOIN sources with aliases (subqueries allowed
as sources), WHERE/HAVING predicate trees over comparisons, LIKE, IN,
BETWEEN, AND/OR/NOT and scalar subqueries, GROUP BY, ORDER BY, LIMIT, and
UNION/INTERSECT/EXCEPT. sql_text prints any node to a single-line string
that re-parses to an equal tree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

AGGREGATES = ("COUNT", "SUM", "AVG", "MIN", "MAX")
SET_OPS = ("UNION", "UNION ALL", "INTERSECT", "EXCEPT")
COMPARISON_OPS = ("=", "!=", "<", ">", "<=", ">=")


@dataclass(frozen=True)
class Column:
    name: str
    table: str | None = None


@dataclass(frozen=True)
class Star:
    table: str | None = None


@dataclass(frozen=True)
class Literal:
    # kind: "string" | "number" | "null"; value holds the string content or
    # the number's text; "" for null.
    kind: str
    value: str


@dataclass(frozen=True)
class Agg:
    func: str
    arg: "Expr"
    distinct: bool = False


@dataclass(frozen=True)
class Arith:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Comparison:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Like:
    expr: "Expr"
    pattern: "Expr"
    negated: bool = False


@dataclass(frozen=True)
class InList:
    expr: "Expr"
    items: tuple["Expr", ...]
    negated: bool = False


@dataclass(frozen=True)
class InQuery:
    expr: "Expr"
    query: "Query"
    negated: bool = False


@dataclass(frozen=True)
class Between:
    expr: "Expr"
    low: "Expr"
    high: "Expr"
    negated: bool = False


@dataclass(frozen=True)
class And:
    operands: tuple["Expr", ...]


@dataclass(frozen=True)
class Or:
    operands: tuple["Expr", ...]


@dataclass(frozen=True)
class Not:
    operand: "Expr"


@dataclass(frozen=True)
class ScalarQuery:
    query: "Query"


Expr = Union[
    Column, Star, Literal, Agg, Arith, Comparison, Like, InList, InQuery,
    Between, And, Or, Not, ScalarQuery,
]


@dataclass(frozen=True)
class SelectItem:
    expr: Expr
    alias: str | None = None


@dataclass(frozen=True)
class TableSource:
    name: str
    alias: str | None = None


@dataclass(frozen=True)
class SubquerySource:
    query: "Query"
    alias: str | None = None


Source = Union[TableSource, SubquerySource]


@dataclass(frozen=True)
class Join:
    source: Source
    condition: Expr


@dataclass(frozen=True)
class OrderItem:
    expr: Expr
    descending: bool = False


@dataclass(frozen=True)
class SelectCore:
    items: tuple[SelectItem, ...]
    sources: tuple[Source, ...]
    joins: tuple[Join, ...] = ()
    distinct: bool = False
    where: Expr | None = None
    group_by: tuple[Expr, ...] = ()
    having: Expr | None = None


@dataclass(frozen=True)
class Query:
    core: SelectCore
    set_op: str | None = None
    set_operand: "Query | None" = None
    order_by: tuple[OrderItem, ...] = field(default=())
    limit: int | None = None


def _string_literal(value: str) -> str:
    return "'" + value.replace("'", "''") + "'"


# Binding strength for parenthesization decisions; higher binds tighter.
_PRECEDENCE = {Or: 1, And: 2, Not: 3, Arith: 5}
_ARITH_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _prec(node: Expr) -> int:
    if isinstance(node, (Comparison, Like, InList, InQuery, Between)):
        return 4
    return _PRECEDENCE.get(type(node), 6)


def _operand_text(node: Expr, parent_prec: int) -> str:
    text = sql_text(node)
    if _prec(node) < parent_prec:
        return f"({text})"
    return text


def _arith_side(node: Expr, parent_op: str, right_side: bool) -> str:
    text = sql_text(node)
    if isinstance(node, Arith):
        child, parent = _ARITH_PREC[node.op], _ARITH_PREC[parent_op]
        if child < parent or (right_side and child == parent):
            return f"({text})"
    return text


def sql_text(node) -> str:
    """Print any AST node as SQL; for Query nodes the result re-parses."""
    if isinstance(node, Query):
        parts = [sql_text(node.core)]
        if node.set_op is not None:
            parts.append(node.set_op)
            parts.append(sql_text(node.set_operand))
        if node.order_by:
            rendered = ", ".join(sql_text(item) for item in node.order_by)
            parts.append(f"ORDER BY {rendered}")
        if node.limit is not None:
            parts.append(f"LIMIT {node.limit}")
        return " ".join(parts)
    if isinstance(node, SelectCore):
        items = ", ".join(sql_text(item) for item in node.items)
        head = "SELECT DISTINCT" if node.distinct else "SELECT"
        sources = ", ".join(sql_text(source) for source in node.sources)
        parts = [f"{head} {items} FROM {sources}"]
        for join in node.joins:
            parts.append(sql_text(join))
        if node.where is not None:
            parts.append(f"WHERE {sql_text(node.where)}")
        if node.group_by:
            parts.append("GROUP BY " + ", ".join(sql_text(e) for e in node.group_by))
        if node.having is not None:
            parts.append(f"HAVING {sql_text(node.having)}")
        return " ".join(parts)
    if isinstance(node, SelectItem):
        text = sql_text(node.expr)
        return f"{text} AS {node.alias}" if node.alias else text
    if isinstance(node, TableSource):
        return f"{node.name} AS {node.alias}" if node.alias else node.name
    if isinstance(node, SubquerySource):
        text = f"({sql_text(node.query)})"
        return f"{text} AS {node.alias}" if node.alias else text
    if isinstance(node, Join):
        return f"JOIN {sql_text(node.source)} ON {sql_text(node.condition)}"
    if isinstance(node, OrderItem):
        return sql_text(node.expr) + (" DESC" if node.descending else "")
    if isinstance(node, Column):
        return f"{node.table}.{node.name}" if node.table else node.name
    if isinstance(node, Star):
        return f"{node.table}.*" if node.table else "*"
    if isinstance(node, Literal):
        if node.kind == "string":
            return _string_literal(node.value)
        if node.kind == "null":
            return "NULL"
        return node.value
    if isinstance(node, Agg):
        inner = sql_text(node.arg)
        if node.distinct:
            inner = f"DISTINCT {inner}"
        return f"{node.func}({inner})"
    if isinstance(node, Arith):
        left = _arith_side(node.left, node.op, right_side=False)
        right = _arith_side(node.right, node.op, right_side=True)
        return f"{left} {node.op} {right}"
    if isinstance(node, Comparison):
        return f"{sql_text(node.left)} {node.op} {sql_text(node.right)}"
    if isinstance(node, Like):
        op = "NOT LIKE" if node.negated else "LIKE"
        return f"{sql_text(node.expr)} {op} {sql_text(node.pattern)}"
    if isinstance(node, InList):
        op = "NOT IN" if node.negated else "IN"
        items = ", ".join(sql_text(item) for item in node.items)
        return f"{sql_text(node.expr)} {op} ({items})"
    if isinstance(node, InQuery):
        op = "NOT IN" if node.negated else "IN"
        return f"{sql_text(node.expr)} {op} ({sql_text(node.query)})"
    if isinstance(node, Between):
        op = "NOT BETWEEN" if node.negated else "BETWEEN"
        return (
            f"{sql_text(node.expr)} {op} "
            f"{sql_text(node.low)} AND {sql_text(node.high)}"
        )
    if isinstance(node, And):
        return " AND ".join(_operand_text(op, _prec(node)) for op in node.operands)
    if isinstance(node, Or):
        return " OR ".join(_operand_text(op, _prec(node)) for op in node.operands)
    if isinstance(node, Not):
        return f"NOT {_operand_text(node.operand, _prec(node))}"
    if isinstance(node, ScalarQuery):
        return f"({sql_text(node.query)})"
    raise TypeError(f"cannot print {type(node).__name__}")

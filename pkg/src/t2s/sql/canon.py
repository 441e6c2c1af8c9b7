"""Schema-free canonicalization of parsed queries.

Two queries that differ only in identifier case, alias names, operand
order of commutative constructs, number spelling, or comparison
direction canonicalize to identical trees.  The transform is purely
syntactic and idempotent.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from decimal import Decimal

from ..errors import SqlSyntaxError
from .nodes import (
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
    sql_text,
)

_MASKED = Literal(kind="string", value="?")
# comparison mirror for operand flips
_MIRROR = {"<": ">", ">": "<", "<=": ">=", ">=": "<="}
_SYMMETRIC = ("=", "!=")


class _Counter:
    def __init__(self) -> None:
        self.value = 0

    def next_alias(self) -> str:
        self.value += 1
        return f"t{self.value}"


class _Scope:
    """One FROM clause: maps visible qualifier names to assigned aliases."""

    def __init__(self, parent: "_Scope | None"):
        self.parent = parent
        self.env: dict[str, str] = {}
        self.n_sources = 0


@dataclass
class _PendingCore:
    """A rewritten core whose alias keep/drop decision is still open."""

    items: tuple[SelectItem, ...]
    sources: list[Source]
    assigned: list[str]
    n_from: int
    join_conditions: list[Expr]
    distinct: bool
    where: Expr | None
    group_by: tuple[Expr, ...]
    having: Expr | None
    scope: _Scope


def _fold_number(text: str) -> str:
    value = Decimal(text)
    out = format(value.normalize(), "f")
    return "0" if out == "-0" else out


def _rank(expr: Expr) -> int:
    # literals sort after subqueries, subqueries after plain expressions
    if isinstance(expr, Literal):
        return 2
    if isinstance(expr, ScalarQuery):
        return 1
    return 0


def _sort_key(expr: Expr) -> tuple[int, str]:
    return (_rank(expr), sql_text(expr))


class _Rewriter:
    def __init__(self, mask_literals: bool):
        self._mask = mask_literals
        self._counter = _Counter()
        self._referenced: set[str] = set()

    # -- query structure --------------------------------------------------

    def rewrite_query(self, query: Query, parent: _Scope | None) -> Query:
        pending = self._rewrite_core(query.core, parent)
        operand = None
        if query.set_operand is not None:
            operand = self.rewrite_query(query.set_operand, parent)
        order_by = tuple(
            OrderItem(
                expr=self._expr(item.expr, pending.scope),
                descending=item.descending,
            )
            for item in query.order_by
        )
        limit = query.limit
        if self._mask and limit is not None:
            limit = -1
        return Query(
            core=self._finalize(pending),
            set_op=query.set_op,
            set_operand=operand,
            order_by=order_by,
            limit=limit,
        )

    def _rewrite_core(self, core: SelectCore, parent: _Scope | None) -> _PendingCore:
        scope = _Scope(parent)
        all_sources = list(core.sources) + [join.source for join in core.joins]
        assigned: list[str] = []
        for source in all_sources:
            alias = self._counter.next_alias()
            assigned.append(alias)
            if isinstance(source, TableSource):
                key = source.alias if source.alias is not None else source.name
                scope.env[key.lower()] = alias
            elif source.alias is not None:
                scope.env[source.alias.lower()] = alias
            scope.n_sources += 1

        # derived tables cannot see their siblings, only enclosing scopes
        rebuilt: list[Source] = []
        for source, alias in zip(all_sources, assigned):
            if isinstance(source, SubquerySource):
                inner = self.rewrite_query(source.query, parent)
                rebuilt.append(SubquerySource(query=inner, alias=alias))
            else:
                rebuilt.append(TableSource(name=source.name.lower(), alias=alias))

        items = tuple(
            SelectItem(
                expr=self._expr(item.expr, scope),
                alias=item.alias.lower() if item.alias else None,
            )
            for item in core.items
        )
        join_conditions = [self._expr(join.condition, scope) for join in core.joins]
        where = self._expr(core.where, scope) if core.where is not None else None
        group_by = tuple(
            sorted((self._expr(g, scope) for g in core.group_by), key=_sort_key)
        )
        having = self._expr(core.having, scope) if core.having is not None else None
        return _PendingCore(
            items=items,
            sources=rebuilt,
            assigned=assigned,
            n_from=len(core.sources),
            join_conditions=join_conditions,
            distinct=core.distinct,
            where=where,
            group_by=group_by,
            having=having,
            scope=scope,
        )

    def _finalize(self, pending: _PendingCore) -> SelectCore:
        # single-source scopes print the bare table unless a correlated
        # reference from an inner scope still needs the alias
        final_sources: list[Source] = []
        final_joins: list[Join] = []
        for index, (source, alias) in enumerate(
            zip(pending.sources, pending.assigned)
        ):
            keep = pending.scope.n_sources > 1 or alias in self._referenced
            out: Source = source if keep else replace(source, alias=None)
            if index < pending.n_from:
                final_sources.append(out)
            else:
                final_joins.append(
                    Join(
                        source=out,
                        condition=pending.join_conditions[index - pending.n_from],
                    )
                )
        return SelectCore(
            items=pending.items,
            sources=tuple(final_sources),
            joins=tuple(final_joins),
            distinct=pending.distinct,
            where=pending.where,
            group_by=pending.group_by,
            having=pending.having,
        )

    # -- expressions -------------------------------------------------------

    def _column(self, column: Column, scope: _Scope) -> Column:
        name = column.name.lower()
        if column.table is None:
            return Column(name=name)
        qualifier = column.table.lower()
        current: _Scope | None = scope
        while current is not None:
            if qualifier in current.env:
                alias = current.env[qualifier]
                if current is scope and scope.n_sources == 1:
                    return Column(name=name)
                self._referenced.add(alias)
                return Column(name=name, table=alias)
            current = current.parent
        return Column(name=name, table=qualifier)

    def _star(self, star: Star, scope: _Scope) -> Star:
        if star.table is None:
            return star
        proxy = self._column(Column(name="*", table=star.table), scope)
        return Star(table=proxy.table)

    def _expr(self, expr: Expr, scope: _Scope) -> Expr:
        if isinstance(expr, Column):
            return self._column(expr, scope)
        if isinstance(expr, Star):
            return self._star(expr, scope)
        if isinstance(expr, Literal):
            if self._mask and expr.kind != "null":
                return _MASKED
            if expr.kind == "number":
                return Literal(kind="number", value=_fold_number(expr.value))
            return expr
        if isinstance(expr, Agg):
            return Agg(
                func=expr.func,
                arg=self._expr(expr.arg, scope),
                distinct=expr.distinct,
            )
        if isinstance(expr, Arith):
            return Arith(
                op=expr.op,
                left=self._expr(expr.left, scope),
                right=self._expr(expr.right, scope),
            )
        if isinstance(expr, Comparison):
            return self._comparison(expr, scope)
        if isinstance(expr, Like):
            return Like(
                expr=self._expr(expr.expr, scope),
                pattern=self._expr(expr.pattern, scope),
                negated=expr.negated,
            )
        if isinstance(expr, InList):
            items = sorted(
                (self._expr(item, scope) for item in expr.items), key=_sort_key
            )
            return InList(
                expr=self._expr(expr.expr, scope),
                items=tuple(items),
                negated=expr.negated,
            )
        if isinstance(expr, InQuery):
            return InQuery(
                expr=self._expr(expr.expr, scope),
                query=self.rewrite_query(expr.query, scope),
                negated=expr.negated,
            )
        if isinstance(expr, Between):
            return Between(
                expr=self._expr(expr.expr, scope),
                low=self._expr(expr.low, scope),
                high=self._expr(expr.high, scope),
                negated=expr.negated,
            )
        if isinstance(expr, And):
            operands = self._flatten(And, expr.operands, scope)
            return And(operands=tuple(sorted(operands, key=_sort_key)))
        if isinstance(expr, Or):
            operands = self._flatten(Or, expr.operands, scope)
            return Or(operands=tuple(sorted(operands, key=_sort_key)))
        if isinstance(expr, Not):
            return Not(operand=self._expr(expr.operand, scope))
        if isinstance(expr, ScalarQuery):
            return ScalarQuery(query=self.rewrite_query(expr.query, scope))
        raise SqlSyntaxError(f"unsupported expression node {type(expr).__name__}")

    def _flatten(self, kind, operands, scope) -> list[Expr]:
        flat: list[Expr] = []
        for operand in operands:
            done = self._expr(operand, scope)
            if isinstance(done, kind):
                flat.extend(done.operands)
            else:
                flat.append(done)
        return flat

    def _comparison(self, expr: Comparison, scope: _Scope) -> Comparison:
        left = self._expr(expr.left, scope)
        right = self._expr(expr.right, scope)
        if expr.op in _SYMMETRIC:
            first, second = sorted((left, right), key=_sort_key)
            return Comparison(op=expr.op, left=first, right=second)
        left_key, right_key = _sort_key(left), _sort_key(right)
        if left_key > right_key:
            return Comparison(op=_MIRROR[expr.op], left=right, right=left)
        if left_key == right_key:
            # identical operands leave orientation underdetermined; x <= x
            # and x >= x are the same flip class, so pick one operator
            return Comparison(op=min(expr.op, _MIRROR[expr.op]), left=left, right=right)
        return Comparison(op=expr.op, left=left, right=right)


def canonicalize(query: Query, *, mask_literals: bool = False) -> Query:
    """Return the canonical form of a parsed query."""
    return _Rewriter(mask_literals).rewrite_query(query, None)


def canonical_sql(query: "Query | str", *, mask_literals: bool = False) -> str:
    """Canonical single-line text for a query or raw SQL string."""
    from .parser import parse_sql

    if isinstance(query, str):
        query = parse_sql(query)
    return sql_text(canonicalize(query, mask_literals=mask_literals))

"""Seeded random query ASTs and meaning-preserving perturbations.

The generator builds trees the printer can round-trip: And/Or nodes are
never directly nested inside the same connective (the printer flattens
them), set-operation chains are right-nested, and set operands carry no
ORDER BY or LIMIT of their own.
"""

from __future__ import annotations

import dataclasses
import random

from t2s.sql.nodes import (
    Agg,
    And,
    Arith,
    Between,
    Column,
    Comparison,
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
    Star,
    SubquerySource,
    TableSource,
)

TABLES = ("emp", "dept", "city", "orders", "singer", "paper")
COLUMNS = ("name", "salary", "population", "age", "country", "yr", "total")
STRINGS = ("HR", "Sales", "bob's", 'a"b', "", "wyoming")
NUMBERS = ("0", "1", "2", "10", "40000", "3.5", "0.5")
COMPARATORS = ("=", "!=", "<", ">", "<=", ">=")


class _Gen:
    def __init__(self, rng: random.Random):
        self.rng = rng
        self._alias_counter = 0

    def _alias(self) -> str:
        self._alias_counter += 1
        return f"a{self._alias_counter}"

    def column(self, qualifiers: tuple[str, ...]) -> Column:
        table = self.rng.choice(qualifiers) if qualifiers and self.rng.random() < 0.6 else None
        return Column(name=self.rng.choice(COLUMNS), table=table)

    def literal(self) -> Literal:
        roll = self.rng.random()
        if roll < 0.5:
            return Literal(kind="number", value=self.rng.choice(NUMBERS))
        if roll < 0.9:
            return Literal(kind="string", value=self.rng.choice(STRINGS))
        return Literal(kind="null", value="")

    def scalar(self, qualifiers: tuple[str, ...], depth: int):
        roll = self.rng.random()
        if roll < 0.5:
            return self.column(qualifiers)
        if roll < 0.8:
            return self.literal()
        if roll < 0.9 or depth >= 2:
            return Agg(
                func=self.rng.choice(("COUNT", "SUM", "AVG", "MIN", "MAX")),
                arg=Star() if self.rng.random() < 0.3 else self.column(qualifiers),
                distinct=self.rng.random() < 0.2,
            )
        return Arith(
            op=self.rng.choice("+-*/"),
            left=self.scalar(qualifiers, depth + 1),
            right=self.scalar(qualifiers, depth + 1),
        )

    def comparison(self, qualifiers: tuple[str, ...], depth: int):
        roll = self.rng.random()
        if roll < 0.45:
            return Comparison(
                op=self.rng.choice(COMPARATORS),
                left=self.column(qualifiers),
                right=self.scalar(qualifiers, depth),
            )
        if roll < 0.55:
            return Like(
                expr=self.column(qualifiers),
                pattern=Literal(kind="string", value="%" + self.rng.choice(("a", "b")) + "%"),
                negated=self.rng.random() < 0.3,
            )
        if roll < 0.65:
            items = tuple(self.literal() for _ in range(self.rng.randint(1, 3)))
            return InList(
                expr=self.column(qualifiers), items=items, negated=self.rng.random() < 0.3
            )
        if roll < 0.75:
            return Between(
                expr=self.column(qualifiers),
                low=Literal(kind="number", value="1"),
                high=Literal(kind="number", value=self.rng.choice(("5", "10"))),
                negated=self.rng.random() < 0.2,
            )
        if roll < 0.85 and depth < 2:
            return InQuery(
                expr=self.column(qualifiers),
                query=self.query(depth + 1, simple=True),
                negated=self.rng.random() < 0.3,
            )
        if roll < 0.95 and depth < 2:
            return Comparison(
                op=self.rng.choice(COMPARATORS),
                left=self.column(qualifiers),
                right=ScalarQuery(query=self.query(depth + 1, simple=True)),
            )
        return Not(operand=self.comparison(qualifiers, depth + 1))

    def condition(self, qualifiers: tuple[str, ...], depth: int):
        roll = self.rng.random()
        if roll < 0.5 or depth >= 2:
            return self.comparison(qualifiers, depth)
        outer = And if roll < 0.8 else Or
        inner_pool = [lambda: self.comparison(qualifiers, depth + 1)]
        # one nested opposite connective keeps the printer's flattening safe
        other = Or if outer is And else And
        operands = [self.comparison(qualifiers, depth + 1) for _ in range(self.rng.randint(2, 3))]
        if self.rng.random() < 0.4:
            operands.append(
                other(
                    operands=tuple(
                        self.comparison(qualifiers, depth + 2) for _ in range(2)
                    )
                )
            )
            self.rng.shuffle(operands)
        del inner_pool
        return outer(operands=tuple(operands))

    def core(self, depth: int, simple: bool) -> tuple[SelectCore, tuple[str, ...]]:
        sources = []
        qualifiers: list[str] = []
        table = self.rng.choice(TABLES)
        if self.rng.random() < 0.5:
            alias = self._alias()
            sources.append(TableSource(name=table, alias=alias))
            qualifiers.append(alias)
        else:
            sources.append(TableSource(name=table))
            qualifiers.append(table)
        if not simple and depth < 2 and self.rng.random() < 0.2:
            alias = self._alias() if self.rng.random() < 0.7 else None
            sources.append(SubquerySource(query=self.query(depth + 1, simple=True), alias=alias))
            if alias:
                qualifiers.append(alias)

        joins = []
        if not simple and self.rng.random() < 0.4:
            for _ in range(self.rng.randint(1, 2)):
                alias = self._alias()
                join_table = self.rng.choice(TABLES)
                joins.append(
                    Join(
                        source=TableSource(name=join_table, alias=alias),
                        condition=Comparison(
                            op="=",
                            left=Column(name="id", table=qualifiers[0]),
                            right=Column(name="id", table=alias),
                        ),
                    )
                )
                qualifiers.append(alias)

        quals = tuple(qualifiers)
        items = tuple(
            SelectItem(
                expr=self.scalar(quals, depth),
                alias=self._alias() if self.rng.random() < 0.15 else None,
            )
            for _ in range(self.rng.randint(1, 3))
        )
        if self.rng.random() < 0.1:
            items = (SelectItem(expr=Star()),)

        group_by = ()
        having = None
        if not simple and self.rng.random() < 0.3:
            group_by = tuple(
                self.column(quals) for _ in range(self.rng.randint(1, 2))
            )
            if self.rng.random() < 0.5:
                having = Comparison(
                    op=self.rng.choice(COMPARATORS),
                    left=Agg(func="COUNT", arg=Star()),
                    right=Literal(kind="number", value="2"),
                )

        return (
            SelectCore(
                items=items,
                sources=tuple(sources),
                joins=tuple(joins),
                distinct=self.rng.random() < 0.2,
                where=self.condition(quals, depth) if self.rng.random() < 0.7 else None,
                group_by=group_by,
                having=having,
            ),
            quals,
        )

    def query(self, depth: int = 0, simple: bool = False) -> Query:
        core, quals = self.core(depth, simple)
        set_op = None
        set_operand = None
        if not simple and depth < 1 and self.rng.random() < 0.2:
            set_op = self.rng.choice(("UNION", "UNION ALL", "INTERSECT", "EXCEPT"))
            set_operand = self.query(depth + 1, simple=True)
        order_by = ()
        limit = None
        if not simple and self.rng.random() < 0.3:
            order_by = tuple(
                OrderItem(expr=self.column(quals), descending=self.rng.random() < 0.5)
                for _ in range(self.rng.randint(1, 2))
            )
        if not simple and self.rng.random() < 0.3:
            limit = self.rng.randint(0, 10)
        return Query(
            core=core,
            set_op=set_op,
            set_operand=set_operand,
            order_by=order_by,
            limit=limit,
        )


def random_query(rng: random.Random) -> Query:
    return _Gen(rng).query()


# -- meaning-preserving rewrites ------------------------------------------------


def _rebuild(node, visit):
    """Rebuild a node bottom-up, applying visit to every dataclass node."""
    if isinstance(node, tuple):
        return tuple(_rebuild(item, visit) for item in node)
    if not dataclasses.is_dataclass(node):
        return node
    changes = {
        f.name: _rebuild(getattr(node, f.name), visit)
        for f in dataclasses.fields(node)
    }
    return visit(dataclasses.replace(node, **changes))


def rename_aliases(query: Query, suffix: str) -> Query:
    """Consistently rename every source alias (generator aliases are unique)."""
    names: set[str] = set()

    def collect(node):
        if isinstance(node, (TableSource, SubquerySource)) and node.alias:
            names.add(node.alias)
        return node

    _rebuild(query, collect)
    mapping = {name: f"z{suffix}{i}" for i, name in enumerate(sorted(names))}

    def rename(node):
        if isinstance(node, (TableSource, SubquerySource)) and node.alias in mapping:
            return dataclasses.replace(node, alias=mapping[node.alias])
        if isinstance(node, (Column, Star)) and node.table in mapping:
            return dataclasses.replace(node, table=mapping[node.table])
        return node

    return _rebuild(query, rename)


_MIRROR = {"<": ">", ">": "<", "<=": ">=", ">=": "<="}


def flip_comparators(query: Query, rng: random.Random) -> Query:
    def flip(node):
        if isinstance(node, Comparison) and rng.random() < 0.5:
            if node.op in ("=", "!="):
                return Comparison(op=node.op, left=node.right, right=node.left)
            if node.op in _MIRROR:
                return Comparison(op=_MIRROR[node.op], left=node.right, right=node.left)
        return node

    return _rebuild(query, flip)


def shuffle_connectives(query: Query, rng: random.Random) -> Query:
    def shuffle(node):
        if isinstance(node, (And, Or)):
            operands = list(node.operands)
            rng.shuffle(operands)
            return type(node)(operands=tuple(operands))
        if isinstance(node, InList):
            items = list(node.items)
            rng.shuffle(items)
            return dataclasses.replace(node, items=tuple(items))
        return node

    return _rebuild(query, shuffle)


def perturb_text(sql: str, rng: random.Random) -> str:
    """Random keyword/identifier case and whitespace outside string literals."""
    out = []
    quote = None
    for ch in sql:
        if quote is not None:
            out.append(ch)
            if ch == quote:
                quote = None
            continue
        if ch in ("'", '"'):
            quote = ch
            out.append(ch)
            continue
        if ch.isalpha():
            out.append(ch.upper() if rng.random() < 0.5 else ch.lower())
        elif ch == " ":
            out.append(" " * rng.randint(1, 3) if rng.random() < 0.2 else " ")
        else:
            out.append(ch)
    text = "".join(out)
    if rng.random() < 0.5:
        text += " ;" if rng.random() < 0.3 else ";"
    return text

"""Schema alignment checks for parsed queries.

Finds identifier-level disagreements between a query and a database
schema: missing tables or columns, case mismatches, ambiguous bare
column names, and qualifiers that name no visible source.  Each issue
carries the closest schema name as a suggestion when one exists, and a
report can be turned into a concrete repair plan for prompt feedback.
"""

from __future__ import annotations

import difflib
import re
from dataclasses import dataclass

from ..errors import SqlSyntaxError
from ..schema import DatabaseSchema, Table
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
    Like,
    Literal,
    Not,
    Or,
    Query,
    ScalarQuery,
    SelectCore,
    Star,
    SubquerySource,
    TableSource,
)
from .parser import parse_sql

ISSUE_KINDS = (
    "unknown_table",
    "unknown_column",
    "case_mismatch",
    "ambiguous_column",
    "alias_error",
)

_SUGGESTION_CUTOFF = 0.55
_MIN_PREFIX_LEN = 3


@dataclass(frozen=True)
class Issue:
    """One identifier problem found while aligning a query to a schema."""

    kind: str
    offending: str
    suggestion: str | None = None

    def __post_init__(self):
        if self.kind not in ISSUE_KINDS:
            raise ValueError(f"unknown issue kind {self.kind!r}")

    def describe(self) -> str:
        text = f"{self.kind.replace('_', ' ')}: {self.offending!r}"
        if self.suggestion is not None:
            text += f" (did you mean {self.suggestion!r}?)"
        return text


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of checking one query against one schema."""

    syntax_ok: bool
    aligned: bool
    issues: tuple[Issue, ...] = ()
    error: str | None = None
    schema: DatabaseSchema | None = None

    @property
    def repairable(self) -> bool:
        # a syntactically valid but misaligned query can be retried with
        # corrective feedback as long as we know what schema to cite
        return self.syntax_ok and not self.aligned and self.schema is not None


@dataclass(frozen=True)
class RepairPlan:
    substitutions: tuple[tuple[str, str], ...]
    directive: str


def _suggest(name: str, candidates: list[str]) -> str | None:
    """Closest candidate to name, or None.

    Exact-prefix containment wins for stems of 3+ characters (dept ->
    department); otherwise closest fuzzy match above the cutoff.
    """
    folded = name.lower()
    if len(folded) >= _MIN_PREFIX_LEN:
        prefixed = [
            c for c in candidates
            if c.lower().startswith(folded) or folded.startswith(c.lower())
        ]
        if prefixed:
            return min(prefixed, key=lambda c: (abs(len(c) - len(name)), c.lower()))
    by_fold: dict[str, str] = {}
    for candidate in candidates:
        by_fold.setdefault(candidate.lower(), candidate)
    close = difflib.get_close_matches(
        folded, list(by_fold), n=1, cutoff=_SUGGESTION_CUTOFF
    )
    return by_fold[close[0]] if close else None


@dataclass
class _Binding:
    """One FROM-clause source: its visible name and resolved table."""

    qualifier: str | None  # folded alias or table name; None when hidden
    table: Table | None  # None for derived tables and unresolved names


class _Checker:
    def __init__(self, schema: DatabaseSchema):
        self._schema = schema
        self._issues: list[Issue] = []
        self._seen: set[tuple[str, str, str | None]] = set()

    def run(self, query: Query) -> tuple[Issue, ...]:
        self._query(query, parents=())
        return tuple(self._issues)

    # -- issue plumbing -----------------------------------------------------

    def _report(self, kind: str, offending: str, suggestion: str | None) -> None:
        key = (kind, offending, suggestion)
        if key in self._seen:
            return
        self._seen.add(key)
        self._issues.append(
            Issue(kind=kind, offending=offending, suggestion=suggestion)
        )

    # -- scope construction --------------------------------------------------

    def _bind_source(self, source, parents) -> _Binding:
        if isinstance(source, SubquerySource):
            # derived tables are opaque: their output columns are unknown
            self._query(source.query, parents)
            qualifier = source.alias.lower() if source.alias else None
            return _Binding(qualifier=qualifier, table=None)
        assert isinstance(source, TableSource)
        qualifier = (source.alias or source.name).lower()
        table = self._schema.find_table(source.name)
        if table is None:
            suggestion = _suggest(
                source.name, [t.name for t in self._schema.tables]
            )
            self._report("unknown_table", source.name, suggestion)
            if suggestion is not None:
                # bind the likely intended table so its columns still
                # resolve and one bad table name yields one issue
                table = self._schema.find_table(suggestion)
            return _Binding(qualifier=qualifier, table=table)
        if table.name != source.name:
            self._report("case_mismatch", source.name, table.name)
        return _Binding(qualifier=qualifier, table=table)

    def _query(self, query: Query, parents: tuple) -> None:
        self._core(query.core, parents)
        scope = self._last_scope
        for item in query.order_by:
            self._expr(item.expr, (scope,) + parents)
        if query.set_operand is not None:
            self._query(query.set_operand, parents)

    def _core(self, core: SelectCore, parents: tuple) -> None:
        bindings = [self._bind_source(s, parents) for s in core.sources]
        bindings += [self._bind_source(j.source, parents) for j in core.joins]
        scope = tuple(bindings)
        chain = (scope,) + parents
        for item in core.items:
            self._expr(item.expr, chain)
        for join in core.joins:
            self._expr(join.condition, chain)
        if core.where is not None:
            self._expr(core.where, chain)
        for group in core.group_by:
            self._expr(group, chain)
        if core.having is not None:
            self._expr(core.having, chain)
        self._last_scope = scope

    # -- reference checks ----------------------------------------------------

    def _column(self, column: Column, chain: tuple) -> None:
        if column.table is not None:
            self._qualified(column, chain)
        else:
            self._bare(column, chain)

    def _qualified(self, column: Column, chain: tuple) -> None:
        qualifier = column.table.lower()
        for scope in chain:
            for binding in scope:
                if binding.qualifier == qualifier:
                    if binding.table is not None:
                        self._check_in_table(column.name, binding.table)
                    return
        visible = [
            b.qualifier for scope in chain for b in scope if b.qualifier
        ]
        self._report("alias_error", column.table, _suggest(column.table, visible))

    def _bare(self, column: Column, chain: tuple) -> None:
        for scope in chain:
            owners = []
            opaque = False
            for binding in scope:
                if binding.table is None:
                    opaque = True
                    continue
                if binding.table.find_column(column.name) is not None:
                    owners.append(binding)
            if len(owners) > 1:
                first = owners[0]
                canonical = first.table.find_column(column.name).name
                self._report(
                    "ambiguous_column",
                    column.name,
                    f"{first.qualifier}.{canonical}" if first.qualifier else canonical,
                )
                return
            if owners:
                self._check_in_table(column.name, owners[0].table)
                return
            if opaque:
                # the column may come from a derived table; cannot verify
                return
        all_columns = [
            c.name for t in self._schema.tables for c in t.columns
        ]
        self._report("unknown_column", column.name, _suggest(column.name, all_columns))

    def _check_in_table(self, name: str, table: Table) -> None:
        found = table.find_column(name)
        if found is None:
            suggestion = _suggest(name, [c.name for c in table.columns])
            if suggestion is None:
                suggestion = _suggest(
                    name,
                    [c.name for t in self._schema.tables for c in t.columns],
                )
            self._report("unknown_column", name, suggestion)
        elif found.name != name:
            self._report("case_mismatch", name, found.name)

    def _expr(self, expr: Expr, chain: tuple) -> None:
        if isinstance(expr, Column):
            self._column(expr, chain)
        elif isinstance(expr, Star):
            if expr.table is not None:
                self._qualified(Column(name="*", table=expr.table), chain)
        elif isinstance(expr, Literal):
            pass
        elif isinstance(expr, Agg):
            if not isinstance(expr.arg, Star) or expr.arg.table is not None:
                self._expr(expr.arg, chain)
        elif isinstance(expr, Arith):
            self._expr(expr.left, chain)
            self._expr(expr.right, chain)
        elif isinstance(expr, Comparison):
            self._expr(expr.left, chain)
            self._expr(expr.right, chain)
        elif isinstance(expr, Like):
            self._expr(expr.expr, chain)
            self._expr(expr.pattern, chain)
        elif isinstance(expr, InList):
            self._expr(expr.expr, chain)
            for item in expr.items:
                self._expr(item, chain)
        elif isinstance(expr, InQuery):
            self._expr(expr.expr, chain)
            self._query_nested(expr.query, chain)
        elif isinstance(expr, Between):
            self._expr(expr.expr, chain)
            self._expr(expr.low, chain)
            self._expr(expr.high, chain)
        elif isinstance(expr, (And, Or)):
            for operand in expr.operands:
                self._expr(operand, chain)
        elif isinstance(expr, Not):
            self._expr(expr.operand, chain)
        elif isinstance(expr, ScalarQuery):
            self._query_nested(expr.query, chain)

    def _query_nested(self, query: Query, outer_chain: tuple) -> None:
        # predicate subqueries see the scopes enclosing their position
        self._query(query, outer_chain)


def validate(query: Query, schema: DatabaseSchema) -> ValidationReport:
    """Check a parsed query's identifiers against a schema."""
    issues = _Checker(schema).run(query)
    return ValidationReport(
        syntax_ok=True,
        aligned=not issues,
        issues=issues,
        schema=schema,
    )


def validate_sql(text: str, schema: DatabaseSchema) -> ValidationReport:
    """Parse then validate; parse failures yield a syntax_ok=False report."""
    try:
        query = parse_sql(text)
    except SqlSyntaxError as exc:
        return ValidationReport(
            syntax_ok=False,
            aligned=False,
            issues=(),
            error=str(exc),
            schema=schema,
        )
    return validate(query, schema)


def suggest_repairs(report: ValidationReport) -> RepairPlan:
    """Concrete corrections for a misaligned report.

    The directive restates every canonical identifier so a retry prompt
    can pin the model to real names.
    """
    substitutions = tuple(
        (issue.offending, issue.suggestion)
        for issue in report.issues
        if issue.suggestion is not None
    )
    if report.aligned or report.schema is None:
        return RepairPlan(substitutions=substitutions, directive="")
    names = ", ".join(report.schema.canonical_names())
    directive = f"Use the exact table and field names from the schema: {names}"
    return RepairPlan(substitutions=substitutions, directive=directive)


def apply_substitutions(sql: str, plan: RepairPlan) -> str:
    """Rewrite each offending identifier to its suggested canonical name.

    Whole-word replacement only, so a stem never corrupts a longer
    identifier it happens to prefix.
    """
    out = sql
    for offending, canonical in plan.substitutions:
        out = re.sub(
            rf"\b{re.escape(offending)}\b",
            canonical.replace("\\", "\\\\"),
            out,
        )
    return out

"""SQL analysis: parsing, canonicalization, and schema validation."""

from .nodes import (
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
    sql_text,
)
from .parser import parse_sql
from .canon import canonical_sql, canonicalize
from .validate import (
    Issue,
    RepairPlan,
    ValidationReport,
    apply_substitutions,
    suggest_repairs,
    validate,
    validate_sql,
)

__all__ = [
    "Agg",
    "And",
    "Arith",
    "Between",
    "Column",
    "Comparison",
    "InList",
    "InQuery",
    "Issue",
    "Join",
    "Like",
    "Literal",
    "Not",
    "Or",
    "OrderItem",
    "Query",
    "RepairPlan",
    "ScalarQuery",
    "SelectCore",
    "SelectItem",
    "Star",
    "SubquerySource",
    "TableSource",
    "ValidationReport",
    "apply_substitutions",
    "canonical_sql",
    "canonicalize",
    "parse_sql",
    "sql_text",
    "suggest_repairs",
    "validate",
    "validate_sql",
]

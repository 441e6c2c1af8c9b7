"""Scoring predictions against gold queries.

Two complementary views: exact set match (structural agreement of the
canonicalized queries, clause by clause) and execution match (identical
result sets on a SQLite fixture).  Reports aggregate both, excluding
items whose gold query itself fails to run.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
import sqlite3
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .errors import EvaluationError, SqlSyntaxError
from .pipeline import RunRecord
from .sql import Query, canonicalize, parse_sql, sql_text

# clause-level units of the structural comparison; bump the version
# whenever the list or a clause's semantics change so scores stay
# comparable across report files
EM_SEGMENTS = (
    "select",
    "from",
    "join",
    "where",
    "group_by",
    "having",
    "order_by",
    "limit",
    "set_op",
)
EM_SEGMENTS_VERSION = 1

TS_MATCH = "match"
TS_RESULT_MISMATCH = "result_mismatch"
TS_PREDICTION_ERROR = "prediction_error"
TS_GOLD_ERROR = "gold_error"
TS_DETAILS = (TS_MATCH, TS_RESULT_MISMATCH, TS_PREDICTION_ERROR, TS_GOLD_ERROR)

_REL_TOL = 1e-6
_ABS_TOL = 1e-9

_ORDER_BY_FALLBACK = re.compile(r"\border\s+by\b", re.IGNORECASE)


@dataclass(frozen=True)
class GoldItem:
    """One reference answer: its id, database, and gold SQL."""

    id: str
    db_id: str
    query: str


@dataclass(frozen=True)
class EvalVerdict:
    """Both scores for one item."""

    id: str
    em: bool
    ts: bool
    ts_detail: str
    attempts: int
    em_diff: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.ts_detail not in TS_DETAILS:
            raise EvaluationError(f"unknown ts_detail {self.ts_detail!r}")


@dataclass
class EvalReport:
    """Aggregate scores over one run."""

    n: int
    em_accuracy: float
    ts_accuracy: float
    exhausted: int
    gold_errors: int
    attempt_histogram: dict[int, int]
    per_item: list[EvalVerdict]
    metadata: dict = field(
        default_factory=lambda: {
            "em_segments": list(EM_SEGMENTS),
            "em_segments_version": EM_SEGMENTS_VERSION,
        }
    )

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "em_accuracy": self.em_accuracy,
            "ts_accuracy": self.ts_accuracy,
            "exhausted": self.exhausted,
            "gold_errors": self.gold_errors,
            "attempt_histogram": {
                str(k): v for k, v in sorted(self.attempt_histogram.items())
            },
            "per_item": [
                {
                    "id": v.id,
                    "em": v.em,
                    "ts": v.ts,
                    "ts_detail": v.ts_detail,
                    "attempts": v.attempts,
                    "em_diff": list(v.em_diff) if v.em_diff is not None else None,
                }
                for v in self.per_item
            ],
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EvalReport":
        return cls(
            n=data["n"],
            em_accuracy=data["em_accuracy"],
            ts_accuracy=data["ts_accuracy"],
            exhausted=data["exhausted"],
            gold_errors=data["gold_errors"],
            attempt_histogram={
                int(k): v for k, v in data["attempt_histogram"].items()
            },
            per_item=[
                EvalVerdict(
                    id=str(v["id"]),
                    em=v["em"],
                    ts=v["ts"],
                    ts_detail=v["ts_detail"],
                    attempts=v["attempts"],
                    em_diff=tuple(v["em_diff"]) if v.get("em_diff") is not None else None,
                )
                for v in data["per_item"]
            ],
            metadata=data["metadata"],
        )


# -- exact set match ---------------------------------------------------------


def _item_set(core) -> tuple[frozenset, bool]:
    return frozenset(sql_text(item) for item in core.items), core.distinct


def _source_set(core) -> frozenset:
    texts = {sql_text(source) for source in core.sources}
    texts.update(sql_text(join.source) for join in core.joins)
    return frozenset(texts)


def _join_conditions(core) -> frozenset:
    return frozenset(sql_text(join.condition) for join in core.joins)


def _optional_text(node) -> str | None:
    return sql_text(node) if node is not None else None


def _query_diff(pred: Query, gold: Query) -> list[str]:
    diff: list[str] = []
    p, g = pred.core, gold.core
    if _item_set(p) != _item_set(g):
        diff.append("select")
    if _source_set(p) != _source_set(g):
        diff.append("from")
    if _join_conditions(p) != _join_conditions(g):
        diff.append("join")
    if _optional_text(p.where) != _optional_text(g.where):
        diff.append("where")
    if {sql_text(e) for e in p.group_by} != {sql_text(e) for e in g.group_by}:
        diff.append("group_by")
    if _optional_text(p.having) != _optional_text(g.having):
        diff.append("having")
    if [sql_text(o) for o in pred.order_by] != [sql_text(o) for o in gold.order_by]:
        diff.append("order_by")
    if pred.limit != gold.limit:
        diff.append("limit")
    if pred.set_op != gold.set_op:
        diff.append("set_op")
    elif pred.set_op is not None:
        if _query_diff(pred.set_operand, gold.set_operand):
            diff.append("set_op")
    return diff


def exact_set_match(
    pred: str, gold: str, *, ignore_literals: bool = False
) -> tuple[bool, list[str]]:
    """Structural agreement of two queries after canonicalization.

    Returns (matched, differing segment names); a query that does not
    parse yields (False, ["syntax"]).
    """
    try:
        pred_ast = canonicalize(parse_sql(pred), mask_literals=ignore_literals)
        gold_ast = canonicalize(parse_sql(gold), mask_literals=ignore_literals)
    except SqlSyntaxError:
        return False, ["syntax"]
    diff = _query_diff(pred_ast, gold_ast)
    return not diff, diff


# -- execution match ---------------------------------------------------------


def _cell_equal(a, b) -> bool:
    if a is None or b is None:
        return a is None and b is None
    a_num = isinstance(a, (int, float)) and not isinstance(a, bool)
    b_num = isinstance(b, (int, float)) and not isinstance(b, bool)
    if a_num and b_num:
        return math.isclose(a, b, rel_tol=_REL_TOL, abs_tol=_ABS_TOL)
    return type(a) is type(b) and a == b


def _row_equal(a: tuple, b: tuple) -> bool:
    return len(a) == len(b) and all(_cell_equal(x, y) for x, y in zip(a, b))


def _rows_equal_ordered(pred_rows: list, gold_rows: list) -> bool:
    return len(pred_rows) == len(gold_rows) and all(
        _row_equal(p, g) for p, g in zip(pred_rows, gold_rows)
    )


def _rows_equal_multiset(pred_rows: list, gold_rows: list) -> bool:
    if len(pred_rows) != len(gold_rows):
        return False
    remaining = list(pred_rows)
    for gold_row in gold_rows:
        for index, pred_row in enumerate(remaining):
            if _row_equal(pred_row, gold_row):
                remaining.pop(index)
                break
        else:
            return False
    return True


def _gold_is_ordered(gold: str) -> bool:
    """Whether the gold demands row order (top-level ORDER BY)."""
    try:
        return bool(parse_sql(gold).order_by)
    except SqlSyntaxError:
        return bool(_ORDER_BY_FALLBACK.search(gold))


def _execute(connection: sqlite3.Connection, sql: str) -> list:
    cursor = connection.execute(sql)
    return cursor.fetchall()


def execution_match(
    pred: str, gold: str, db_path: str | Path
) -> tuple[bool, str]:
    """Run both queries on the fixture and compare result sets.

    Returns (ts, ts_detail).  Row order matters only when the gold query
    itself orders its output.
    """
    db_path = Path(db_path)
    if not db_path.is_file():
        raise EvaluationError(f"database fixture not found: {db_path}")
    try:
        connection = sqlite3.connect(f"file:{db_path}?mode=ro", uri=True)
    except sqlite3.Error as exc:
        raise EvaluationError(f"cannot open fixture {db_path}: {exc}") from exc
    try:
        try:
            gold_rows = _execute(connection, gold)
        except sqlite3.Error:
            return False, TS_GOLD_ERROR
        try:
            pred_rows = _execute(connection, pred)
        except sqlite3.Error:
            return False, TS_PREDICTION_ERROR
    finally:
        connection.close()
    if _gold_is_ordered(gold):
        matched = _rows_equal_ordered(pred_rows, gold_rows)
    else:
        matched = _rows_equal_multiset(pred_rows, gold_rows)
    return (True, TS_MATCH) if matched else (False, TS_RESULT_MISMATCH)


# -- run-level aggregation -----------------------------------------------------


def load_golds(path: str | Path) -> list[GoldItem]:
    """Read gold items from a JSON Lines file of {id, db_id, query}."""
    golds = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise EvaluationError(
                    f"{path}: line {number} is not valid JSON: {exc}"
                ) from exc
            for key in ("id", "db_id", "query"):
                if key not in data:
                    raise EvaluationError(
                        f"{path}: line {number} is missing {key!r}"
                    )
            golds.append(
                GoldItem(
                    id=str(data["id"]),
                    db_id=data["db_id"],
                    query=data["query"],
                )
            )
    return golds


def fixture_path(fixtures_dir: str | Path, db_id: str) -> Path:
    return Path(fixtures_dir) / db_id / f"{db_id}.sqlite"


def evaluate_run(
    records: Sequence[RunRecord],
    golds: Sequence[GoldItem],
    fixtures_dir: str | Path,
    *,
    ignore_literals: bool = False,
) -> EvalReport:
    """Score a batch of run records against their gold items."""
    if len(records) != len(golds):
        raise EvaluationError(
            f"{len(records)} records vs {len(golds)} golds; counts must match"
        )
    for record, gold in zip(records, golds):
        if record.id != gold.id:
            raise EvaluationError(
                f"record/gold id mismatch: {record.id!r} vs {gold.id!r}"
            )

    per_item: list[EvalVerdict] = []
    histogram: dict[int, int] = {}
    for record, gold in zip(records, golds):
        attempts = len(record.attempts)
        histogram[attempts] = histogram.get(attempts, 0) + 1
        db = fixture_path(fixtures_dir, gold.db_id)
        if record.final_sql is None:
            # check the gold anyway so fixture defects stay visible
            _, gold_check = execution_match(gold.query, gold.query, db)
            detail = (
                TS_GOLD_ERROR if gold_check == TS_GOLD_ERROR else TS_PREDICTION_ERROR
            )
            per_item.append(
                EvalVerdict(
                    id=record.id,
                    em=False,
                    ts=False,
                    ts_detail=detail,
                    attempts=attempts,
                    em_diff=None,
                )
            )
            continue
        em, diff = exact_set_match(
            record.final_sql, gold.query, ignore_literals=ignore_literals
        )
        ts, detail = execution_match(record.final_sql, gold.query, db)
        per_item.append(
            EvalVerdict(
                id=record.id,
                em=em,
                ts=ts,
                ts_detail=detail,
                attempts=attempts,
                em_diff=tuple(diff) if diff else None,
            )
        )

    gold_errors = sum(1 for v in per_item if v.ts_detail == TS_GOLD_ERROR)
    scored = [v for v in per_item if v.ts_detail != TS_GOLD_ERROR]
    denominator = len(scored)
    em_accuracy = (
        sum(1 for v in scored if v.em) / denominator if denominator else 0.0
    )
    ts_accuracy = (
        sum(1 for v in scored if v.ts) / denominator if denominator else 0.0
    )
    exhausted = sum(1 for r in records if r.status == "exhausted")
    return EvalReport(
        n=len(per_item),
        em_accuracy=em_accuracy,
        ts_accuracy=ts_accuracy,
        exhausted=exhausted,
        gold_errors=gold_errors,
        attempt_histogram=histogram,
        per_item=per_item,
    )


# -- report rendering -----------------------------------------------------------


REPORT_FORMATS = ("json", "csv", "text")


def _bool_text(value: bool) -> str:
    return "true" if value else "false"


def emit_report(report: EvalReport, format: str = "json") -> str:
    """Render a report as a json document, csv table, or aligned text."""
    if format == "json":
        return json.dumps(report.as_dict(), sort_keys=True, indent=2) + "\n"
    if format == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["id", "em", "ts", "attempts", "detail"])
        for verdict in report.per_item:
            writer.writerow(
                [
                    verdict.id,
                    _bool_text(verdict.em),
                    _bool_text(verdict.ts),
                    verdict.attempts,
                    verdict.ts_detail,
                ]
            )
        return buffer.getvalue()
    if format == "text":
        headline = (
            f"EM {report.em_accuracy * 100:.1f}% / "
            f"TS {report.ts_accuracy * 100:.1f}%"
        )
        lines = [
            headline,
            f"items {report.n}, exhausted {report.exhausted}, "
            f"gold errors {report.gold_errors}",
            "",
        ]
        rows = [("id", "em", "ts", "attempts", "detail")]
        for verdict in report.per_item:
            rows.append(
                (
                    verdict.id,
                    _bool_text(verdict.em),
                    _bool_text(verdict.ts),
                    str(verdict.attempts),
                    verdict.ts_detail,
                )
            )
        widths = [max(len(row[i]) for row in rows) for i in range(5)]
        for row in rows:
            lines.append(
                "  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip()
            )
        return "\n".join(lines) + "\n"
    raise EvaluationError(
        f"unknown report format {format!r}; expected one of {REPORT_FORMATS}"
    )

"""Recover one clean SQL statement from raw model output.

Raw completions arrive polluted: echoed prompt blocks, labels, code fences,
stray quotes, and backslash escape artifacts. Extraction removes every
backslash, discards everything before the final response marker (and, when
one follows, the final ``SQL:`` label), then picks the last complete
statement. A statement runs from a SELECT/WITH keyword to the first
semicolon outside string literals; anchors sharing a terminator collapse to
the earliest one, so subquery and set-operand SELECTs never shadow their
enclosing statement.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ExtractionError

# Tolerates the label variants seen in the wild: '# Response:', '#Response:',
# '# Response' without the colon.
_RESPONSE_MARKER = re.compile(r"#+[ \t]*Response[ \t]*:?", re.IGNORECASE)
_SQL_LABEL = re.compile(r"^[ \t]*SQL[ \t]*:", re.IGNORECASE | re.MULTILINE)
_START_KEYWORD = re.compile(r"\b(?:select|with)\b", re.IGNORECASE)
_FENCE_AT = re.compile(r"^[ \t]*```", re.MULTILINE)
_NEWLINE_RUN = re.compile(r"[ \t]*\n[\s]*")
_SPACE_RUN = re.compile(r"[ \t]{2,}")


@dataclass(frozen=True)
class ExtractionResult:
    """The clean statement plus bookkeeping on what was thrown away."""

    sql: str
    discarded_prefix_len: int
    discarded_suffix_len: int
    backslashes_removed: int


def _statement_end(text: str, start: int) -> int:
    """End index (exclusive) of the statement anchored at start.

    Runs to the first semicolon outside quotes; a code-fence line or end of
    text also terminates.
    """
    quote: str | None = None
    i = start
    while i < len(text):
        ch = text[i]
        if quote is not None:
            if ch == quote:
                quote = None
        elif ch in ("'", '"'):
            quote = ch
        elif ch == ";":
            return i + 1
        elif ch == "\n":
            fence = _FENCE_AT.match(text, i + 1)
            if fence is not None:
                return i
        i += 1
    return len(text)


def _candidates(region: str) -> list[tuple[int, int]]:
    """(start, end) spans of candidate statements, one per terminator.

    Every SELECT/WITH keyword anchors a span; spans that share a terminator
    are collapsed to the earliest anchor (the full statement, not its
    subqueries or later set operands).
    """
    by_end: dict[int, int] = {}
    for match in _START_KEYWORD.finditer(region):
        start = match.start()
        end = _statement_end(region, start)
        by_end.setdefault(end, start)  # anchors arrive in order; first wins
    return sorted(((start, end) for end, start in by_end.items()), key=lambda s: s[1])


def extract_sql(raw_text: str) -> ExtractionResult:
    """Extract the final SQL statement from a raw completion.

    Returns the statement with internal newline runs flattened to single
    spaces, plus how many characters of prefix/suffix were discarded (in
    backslash-free coordinates) and how many backslashes were removed.
    Raises ExtractionError when no statement is present.
    """
    backslashes_removed = raw_text.count("\\")
    cleaned = raw_text.replace("\\", "")

    offset = 0
    marker = None
    for marker in _RESPONSE_MARKER.finditer(cleaned):
        pass
    if marker is not None:
        offset = marker.end()
    region = cleaned[offset:]

    # Prompt-format echoes put exemplar statements before the final 'SQL:'
    # label; cut there too, but only if a statement actually follows.
    label = None
    for label in _SQL_LABEL.finditer(region):
        pass
    spans: list[tuple[int, int]] = []
    if label is not None:
        after = region[label.end() :]
        spans = [(s + label.end(), e + label.end()) for s, e in _candidates(after)]
    if not spans:
        spans = _candidates(region)
    if not spans:
        raise ExtractionError("no SQL statement found in raw output", raw_text)

    start, end = spans[-1]
    statement = region[start:end]
    statement = _NEWLINE_RUN.sub(" ", statement)
    statement = _SPACE_RUN.sub(" ", statement)
    statement = statement.strip()
    if not statement.endswith(";"):
        # wrap-quote junk is unpaired here (its opener precedes the anchor);
        # a string literal's closing quote is paired, so parity separates them
        statement = statement.rstrip(" \t`")
        while (
            statement
            and statement[-1] in "'\""
            and statement.count(statement[-1]) % 2 == 1
        ):
            statement = statement[:-1].rstrip(" \t`")

    if not statement:
        raise ExtractionError("no SQL statement found in raw output", raw_text)
    return ExtractionResult(
        sql=statement,
        discarded_prefix_len=offset + start,
        discarded_suffix_len=len(cleaned) - (offset + end),
        backslashes_removed=backslashes_removed,
    )

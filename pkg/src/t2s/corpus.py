"""Example corpus: raw-text normalization, training strings, dataset IO.

A corpus is an ordered list of (instruction, schema_id, gold SQL) points.
Training strings render one point together with its schema into the three
labeled blocks consumed by downstream prompt construction:

    # Instruction:
    '<instruction>'

    # Schema:
    <inline schema dict>

    # Response:
    '<gold SQL>'
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .errors import CorpusError
from .schema import DatabaseSchema, SchemaCatalog

INSTRUCTION_LABEL = "# Instruction:"
SCHEMA_LABEL = "# Schema:"
RESPONSE_LABEL = "# Response:"

_FENCE_LINE = re.compile(r"^\s*```.*$", re.MULTILINE)
_HTML_TAG = re.compile(r"</?[A-Za-z][^<>]*>")
_MENTION = re.compile(r"@\w+")
_EMPHASIS = (
    re.compile(r"\*\*([^*\n]+)\*\*"),
    re.compile(r"\*([^*\n]+)\*"),
    re.compile(r"__([^_\n]+)__"),
)
_HEADER_MARK = re.compile(r"^(?:#+\s*)+", re.MULTILINE)
_SPACE_RUN = re.compile(r"[ \t]{2,}")
_LINE_EDGE = re.compile(r"^[ \t]+|[ \t]+$", re.MULTILINE)
_BLANK_RUN = re.compile(r"\n(?:[ \t]*\n)+")


def preprocess(raw: str) -> str:
    """Normalize raw dataset text.

    Drops Markdown fence lines (keeping fenced content), HTML tags, @word
    mentions, emphasis markers, and leading header marks; collapses space
    runs and blank-line runs; trims line and outer whitespace. Idempotent:
    preprocess(preprocess(x)) == preprocess(x).
    """
    text = raw
    while True:
        prior = text
        text = _FENCE_LINE.sub("", text)
        text = _HTML_TAG.sub("", text)
        text = _MENTION.sub("", text)
        for pattern in _EMPHASIS:
            text = pattern.sub(r"\1", text)
        text = _HEADER_MARK.sub("", text)
        text = _SPACE_RUN.sub(" ", text)
        text = _LINE_EDGE.sub("", text)
        text = _BLANK_RUN.sub("\n", text)
        text = text.strip()
        # one removal can expose another's artifact (a stripped mention can
        # leave a header mark at line start); every pass only deletes
        # characters, so iterating to the fixed point terminates
        if text == prior:
            return text


@dataclass(frozen=True)
class ExamplePoint:
    """One corpus point: an instruction, its database, and the gold SQL."""

    instruction: str
    schema_id: str
    gold_sql: str

    def __post_init__(self):
        if not self.instruction.strip():
            raise CorpusError("instruction must be non-empty")
        if not self.schema_id:
            raise CorpusError("schema_id must be non-empty")
        if not self.gold_sql.strip():
            raise CorpusError("gold_sql must be non-empty")


_LABEL_LINE = re.compile(r"^# (Instruction|Schema|Response):$", re.MULTILINE)


@dataclass(frozen=True)
class TrainingString:
    """A rendered training point; holds the three labels exactly once, in order."""

    text: str

    def __post_init__(self):
        labels = [m.group(1) for m in _LABEL_LINE.finditer(self.text)]
        if labels != ["Instruction", "Schema", "Response"]:
            raise CorpusError(
                "training string must contain the Instruction, Schema, and "
                f"Response labels exactly once, in order (found {labels})"
            )

    def __str__(self) -> str:
        return self.text


def inline_schema_text(schema: DatabaseSchema, include_keys: bool = False) -> str:
    """Render a schema as single-quoted dict text for prompt blocks.

    The first table stays on the opening line and each further table starts
    a new line. Quirk preserved from the original template: the outer dict
    never receives its closing brace; stored goldens depend on this byte
    layout, so do not "fix" it.
    """
    tables = []
    for table in schema.tables:
        cols = ", ".join(f"'{c}'" for c in table.column_names())
        tables.append(f"{{'name': '{table.name}', 'columns': [{cols}]}}")
    body = ",\n".join(tables)
    text = f"{{'database': '{schema.name}', 'metadata': [{body}]"
    if include_keys and schema.primary_keys:
        keys = ", ".join(f"'{ref}'" for ref in schema.primary_keys)
        text += f", 'primary_keys': [{keys}]"
    if include_keys and schema.foreign_keys:
        pairs = ", ".join(f"['{a}', '{b}']" for a, b in schema.foreign_keys)
        text += f", 'foreign_keys': [{pairs}]"
    return text


def format_training_point(point: ExamplePoint, schema: DatabaseSchema) -> TrainingString:
    """Render one corpus point into its labeled training string.

    Rendering is a pure function of the inputs; the instruction and gold SQL
    appear verbatim inside single quotes.
    """
    if schema.name != point.schema_id:
        raise CorpusError(
            f"point targets schema {point.schema_id!r} but got {schema.name!r}"
        )
    text = (
        f"{INSTRUCTION_LABEL}\n'{point.instruction}'\n\n"
        f"{SCHEMA_LABEL}\n{inline_schema_text(schema)}\n\n"
        f"{RESPONSE_LABEL}\n'{point.gold_sql}'"
    )
    return TrainingString(text=text)


def parse_training_string(text: str) -> tuple[str, str, str]:
    """Recover (instruction, schema name, gold SQL) from a rendered string."""
    pattern = re.compile(
        r"^# Instruction:\n(?P<instruction>.*?)\n\n"
        r"# Schema:\n(?P<schema>.*?)\n\n"
        r"# Response:\n(?P<response>.*)$",
        re.DOTALL,
    )
    match = pattern.match(text)
    if match is None:
        raise CorpusError("text does not have the three labeled blocks")

    def unquote(block: str) -> str:
        if len(block) >= 2 and block.startswith("'") and block.endswith("'"):
            return block[1:-1]
        return block

    name_match = re.match(r"\{'database': '([^']*)'", match.group("schema"))
    if name_match is None:
        raise CorpusError("schema block does not name a database")
    return (
        unquote(match.group("instruction")),
        name_match.group(1),
        unquote(match.group("response")),
    )


_FIELD_ALIASES = {
    "question": ("question", "instruction"),
    "db_id": ("db_id", "schema_id"),
    "query": ("query", "gold_sql"),
}


def _point_from_record(record: dict, where: str, catalog: SchemaCatalog | None) -> ExamplePoint:
    if not isinstance(record, dict):
        raise CorpusError(f"{where}: record must be an object")
    values = {}
    for field_name, aliases in _FIELD_ALIASES.items():
        for alias in aliases:
            if alias in record:
                values[field_name] = record[alias]
                break
        else:
            raise CorpusError(f"{where}: record is missing the {field_name!r} field")
        if not isinstance(values[field_name], str) or not values[field_name].strip():
            raise CorpusError(f"{where}: field {field_name!r} must be a non-empty string")
    if catalog is not None and values["db_id"] not in catalog:
        raise CorpusError(
            f"{where}: db_id {values['db_id']!r} does not resolve in the catalog"
        )
    try:
        return ExamplePoint(
            instruction=values["question"],
            schema_id=values["db_id"],
            gold_sql=values["query"],
        )
    except CorpusError as exc:
        raise CorpusError(f"{where}: {exc}") from exc


def load_corpus(
    source: str | Path | Iterable[dict], catalog: SchemaCatalog | None = None
) -> list[ExamplePoint]:
    """Load corpus points in file order.

    Accepts a JSON Lines path (one object per line, blank lines skipped), a
    JSON-array file of the same objects, or an iterable of parsed dicts.
    Field aliases question/instruction, db_id/schema_id, query/gold_sql are
    accepted. When a catalog is given, every db_id must resolve in it.
    Errors name the offending record.
    """
    records: list[tuple[str, dict]] = []
    if isinstance(source, (str, Path)):
        path = Path(source)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise CorpusError(f"cannot read corpus file {path}: {exc}") from exc
        stripped = text.lstrip()
        if stripped.startswith("["):
            try:
                parsed = json.loads(text)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}: invalid JSON: {exc}") from exc
            for i, record in enumerate(parsed):
                records.append((f"{path}: record {i}", record))
        else:
            index = 0
            for line_no, line in enumerate(text.splitlines(), start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise CorpusError(
                        f"{path}: record {index} (line {line_no}) is invalid JSON: {exc}"
                    ) from exc
                records.append((f"{path}: record {index} (line {line_no})", record))
                index += 1
    else:
        for i, record in enumerate(source):
            records.append((f"record {i}", record))
    return [_point_from_record(record, where, catalog) for where, record in records]


def save_corpus(points: Iterable[ExamplePoint], path: str | Path) -> int:
    """Write points as JSON Lines; returns the number of records written.

    load_corpus(save_corpus(points)) reproduces the same points in order.
    """
    path = Path(path)
    count = 0
    with path.open("w", encoding="utf-8") as handle:
        for point in points:
            record = {
                "question": point.instruction,
                "db_id": point.schema_id,
                "query": point.gold_sql,
            }
            handle.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
            count += 1
    return count


def split_corpus(
    points: list[ExamplePoint], fraction: float, seed: int
) -> tuple[list[ExamplePoint], list[ExamplePoint]]:
    """Split points into (train, held_out) deterministically.

    The train side receives floor(n * fraction) points chosen by a seeded
    shuffle; both sides preserve original corpus order. The two sides
    partition the input exactly.
    """
    if len(points) < 2:
        raise CorpusError("cannot split a corpus of fewer than 2 points")
    if not 0.0 < fraction < 1.0:
        raise CorpusError(f"split fraction must be in (0, 1), got {fraction}")
    indices = list(range(len(points)))
    random.Random(seed).shuffle(indices)
    n_train = int(len(points) * fraction)
    train_idx = sorted(indices[:n_train])
    held_idx = sorted(indices[n_train:])
    return [points[i] for i in train_idx], [points[i] for i in held_idx]

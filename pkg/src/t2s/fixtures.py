"""Build single-file SQLite databases for the bundled demo schemas.

Each database lands at fixtures/<db_id>/<db_id>.sqlite, the layout the
evaluator resolves. Row content is small but chosen so that every bundled
gold query returns a non-empty result and the known equivalence pairs
(structurally different queries with identical results) actually hold.
"""

from __future__ import annotations

import json
import sqlite3
from importlib import resources
from pathlib import Path

from .errors import EvaluationError
from .schema import DatabaseSchema, load_schema

__all__ = [
    "DEMO_ROWS",
    "bundled_schema_ids",
    "load_bundled_schema",
    "bundled_corpus_path",
    "build_fixture",
    "build_demo_fixtures",
]

_TYPE_AFFINITY = {
    "text": "TEXT",
    "integer": "INTEGER",
    "int": "INTEGER",
    "real": "REAL",
    "float": "REAL",
    "boolean": "INTEGER",
    "date": "TEXT",
    "time": "TEXT",
}

# Rows per database, keyed by table name in schema declaration order.
# geo: the top-population wyoming city is unique so the MAX-subquery gold
# and the ORDER BY/LIMIT 1 variant agree.
DEMO_ROWS: dict[str, dict[str, list[tuple]]] = {
    "geo": {
        "city": [
            ("cheyenne", 65000, "wyoming"),
            ("casper", 59000, "wyoming"),
            ("denver", 700000, "colorado"),
        ],
    },
    "employees": {
        "Employees": [
            (1, "Alice", "Sales", 52000),
            (2, "Bob", "Sales", 38000),
            (3, "Carol", "HR", 45000),
            (4, "Dan", "HR", 61000),
        ],
    },
    "entrepreneur": {
        "entrepreneur": [
            ("Umbrella", 1, 1),
            ("Tillman Ernser", 2, 2),
            ("Acme", 3, 3),
        ],
        "people": [
            (1, "1970-01-02", 1.80),
            (2, "1985-03-04", 1.75),
            (3, "1990-05-06", 1.68),
        ],
    },
    "concert_singer": {
        "singer": [
            ("France", 25),
            ("France", 19),
            ("Japan", 32),
            ("Brazil", 41),
            ("Brazil", 18),
        ],
    },
    "scholar": {
        "author": [
            (1, "brian curless"),
            (2, "Richard Ladner"),
        ],
        "keyphrase": [
            (10, "convolution"),
        ],
        "paper": [
            (100, 1000, 2015),
            (101, 1001, 2016),
        ],
        "paperkeyphrase": [
            (100, 10),
        ],
        "writes": [
            (100, 1),
            (101, 2),
        ],
        "venue": [
            (1000, "NIPS"),
            (1001, "chi"),
        ],
    },
}


def bundled_schema_ids() -> list[str]:
    """Names of the schema documents shipped inside the package."""
    schema_dir = resources.files("t2s").joinpath("data/schemas")
    return sorted(path.name[: -len(".json")] for path in schema_dir.iterdir() if path.name.endswith(".json"))


def load_bundled_schema(db_id: str) -> DatabaseSchema:
    path = resources.files("t2s").joinpath(f"data/schemas/{db_id}.json")
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise EvaluationError(f"no bundled schema named {db_id!r}") from None
    return load_schema(json.loads(text))


def bundled_corpus_path() -> Path:
    """Filesystem path of the packaged demo corpus."""
    return Path(str(resources.files("t2s").joinpath("data/corpus.jsonl")))


def _ddl(schema: DatabaseSchema, table_name: str) -> str:
    table = schema.find_table(table_name)
    if table is None:
        raise EvaluationError(f"table {table_name!r} is not part of schema {schema.name!r}")
    parts = []
    for column in table.columns:
        affinity = _TYPE_AFFINITY.get(column.data_type, "TEXT")
        parts.append(f'"{column.name}" {affinity}')
    return f'CREATE TABLE "{table.name}" ({", ".join(parts)})'


def build_fixture(schema: DatabaseSchema, rows: dict[str, list[tuple]], db_path: Path) -> Path:
    """Create one SQLite file holding `rows` laid out per `schema`."""
    db_path.parent.mkdir(parents=True, exist_ok=True)
    if db_path.exists():
        db_path.unlink()
    con = sqlite3.connect(db_path)
    try:
        with con:
            for table in schema.tables:
                con.execute(_ddl(schema, table.name))
                table_rows = rows.get(table.name, [])
                if table_rows:
                    slots = ", ".join("?" for _ in table.columns)
                    con.executemany(f'INSERT INTO "{table.name}" VALUES ({slots})', table_rows)
    finally:
        con.close()
    return db_path


def build_demo_fixtures(root: Path) -> list[Path]:
    """Materialize every bundled demo database under root/<db_id>/<db_id>.sqlite."""
    root = Path(root)
    built = []
    for db_id in sorted(DEMO_ROWS):
        schema = load_bundled_schema(db_id)
        db_path = root / db_id / f"{db_id}.sqlite"
        built.append(build_fixture(schema, DEMO_ROWS[db_id], db_path))
    return built

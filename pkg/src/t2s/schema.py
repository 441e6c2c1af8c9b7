"""Database schema catalog: typed schema model, loaders, and name resolution.

Schemas are immutable. Identifier resolution is ASCII-case-insensitive and
always reports the schema's own spelling as the canonical form, so downstream
repair logic rewrites predictions toward the schema rather than the reverse.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

from .errors import SchemaError

DATA_TYPES = ("text", "integer", "real", "boolean", "date", "other")

RESOLVED_EXACT = "exact"
RESOLVED_CASE_FOLD = "case_fold"
RESOLVED_ABSENT = "absent"
RESOLVED_AMBIGUOUS = "ambiguous"

# SPIDER's coarse column types, mapped onto DATA_TYPES.
_SPIDER_TYPE_MAP = {
    "text": "text",
    "number": "real",
    "time": "date",
    "boolean": "boolean",
    "others": "other",
}


def _fold(name: str) -> str:
    return name.lower()


@dataclass(frozen=True)
class Column:
    """A named column with an optional coarse data type."""

    name: str
    data_type: str = "other"

    def __post_init__(self):
        if not self.name:
            raise SchemaError("column name must be non-empty")
        if self.data_type not in DATA_TYPES:
            raise SchemaError(
                f"column {self.name!r}: unknown data type {self.data_type!r}"
            )


@dataclass(frozen=True)
class Table:
    """A named table with at least one column."""

    name: str
    columns: tuple[Column, ...]

    def __post_init__(self):
        if not self.name:
            raise SchemaError("table name must be non-empty")
        if not self.columns:
            raise SchemaError(f"table {self.name!r} declares no columns")
        seen: set[str] = set()
        for col in self.columns:
            folded = _fold(col.name)
            if folded in seen:
                raise SchemaError(
                    f"table {self.name!r}: duplicate column {col.name!r}"
                )
            seen.add(folded)

    def column_names(self) -> tuple[str, ...]:
        return tuple(col.name for col in self.columns)

    def find_column(self, name: str) -> Column | None:
        """Case-insensitive column lookup; None when absent."""
        folded = _fold(name)
        for col in self.columns:
            if _fold(col.name) == folded:
                return col
        return None


@dataclass(frozen=True)
class ColumnRef:
    """A table.column pair in canonical schema spelling."""

    table: str
    column: str

    def __str__(self) -> str:
        return f"{self.table}.{self.column}"


@dataclass(frozen=True)
class Resolution:
    """Outcome of resolving an identifier against a schema.

    kind is one of "exact", "case_fold", "absent", "ambiguous". canonical
    carries the schema's spelling when the identifier was found; table names
    the owning table for column resolutions; candidates lists the owning
    tables (schema declaration order) when a column is ambiguous.
    """

    kind: str
    canonical: str | None = None
    table: str | None = None
    candidates: tuple[str, ...] = ()

    @property
    def found(self) -> bool:
        return self.kind in (RESOLVED_EXACT, RESOLVED_CASE_FOLD)


@dataclass(frozen=True)
class DatabaseSchema:
    """An immutable database schema with optional key declarations."""

    name: str
    tables: tuple[Table, ...]
    primary_keys: tuple[ColumnRef, ...] = ()
    foreign_keys: tuple[tuple[ColumnRef, ColumnRef], ...] = ()

    def __post_init__(self):
        if not self.name:
            raise SchemaError("schema name must be non-empty")
        if not self.tables:
            raise SchemaError(f"schema {self.name!r} declares no tables")
        seen: set[str] = set()
        for table in self.tables:
            folded = _fold(table.name)
            if folded in seen:
                raise SchemaError(
                    f"schema {self.name!r}: duplicate table {table.name!r}"
                )
            seen.add(folded)
        for ref in self.primary_keys:
            self._require_ref(ref, "primary key")
        for source, target in self.foreign_keys:
            self._require_ref(source, "foreign key")
            self._require_ref(target, "foreign key")

    def _require_ref(self, ref: ColumnRef, kind: str) -> None:
        table = self._tables_by_fold.get(_fold(ref.table))
        if table is None:
            raise SchemaError(
                f"schema {self.name!r}: {kind} references unknown table {ref.table!r}"
            )
        if _fold(ref.column) not in {_fold(c.name) for c in table.columns}:
            raise SchemaError(
                f"schema {self.name!r}: {kind} references unknown column {ref!s}"
            )

    @cached_property
    def _tables_by_fold(self) -> dict[str, Table]:
        return {_fold(t.name): t for t in self.tables}

    def table_names(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.tables)

    def find_table(self, name: str) -> Table | None:
        """Case-insensitive table lookup; None when absent."""
        return self._tables_by_fold.get(_fold(name))

    def canonical_names(self) -> tuple[str, ...]:
        """All table and column names, each table followed by its columns."""
        names: list[str] = []
        for table in self.tables:
            names.append(table.name)
            names.extend(table.column_names())
        return tuple(names)


def resolve_table(schema: DatabaseSchema, name: str) -> Resolution:
    """Resolve a table identifier case-insensitively.

    Returns an exact, case_fold, or absent Resolution; canonical always
    carries the schema's spelling when found.
    """
    table = schema._tables_by_fold.get(_fold(name))
    if table is None:
        return Resolution(kind=RESOLVED_ABSENT)
    kind = RESOLVED_EXACT if table.name == name else RESOLVED_CASE_FOLD
    return Resolution(kind=kind, canonical=table.name, table=table.name)


def resolve_column(
    schema: DatabaseSchema, table_hint: str | None, name: str
) -> Resolution:
    """Resolve a column identifier, optionally scoped to one table.

    With a table_hint the hint itself must resolve (SchemaError otherwise)
    and the search is confined to that table. Without a hint, all tables are
    searched; multiple owners yield an ambiguous Resolution whose candidates
    list the owning tables in schema declaration order.
    """
    folded = _fold(name)
    if table_hint is not None:
        hint = resolve_table(schema, table_hint)
        if not hint.found:
            raise SchemaError(
                f"schema {schema.name!r}: table hint {table_hint!r} does not resolve"
            )
        table = schema._tables_by_fold[_fold(hint.canonical)]
        for col in table.columns:
            if _fold(col.name) == folded:
                kind = RESOLVED_EXACT if col.name == name else RESOLVED_CASE_FOLD
                return Resolution(kind=kind, canonical=col.name, table=table.name)
        return Resolution(kind=RESOLVED_ABSENT, table=table.name)

    owners: list[tuple[Table, Column]] = []
    for table in schema.tables:
        for col in table.columns:
            if _fold(col.name) == folded:
                owners.append((table, col))
                break
    if not owners:
        return Resolution(kind=RESOLVED_ABSENT)
    if len(owners) > 1:
        return Resolution(
            kind=RESOLVED_AMBIGUOUS,
            candidates=tuple(table.name for table, _ in owners),
        )
    table, col = owners[0]
    kind = RESOLVED_EXACT if col.name == name else RESOLVED_CASE_FOLD
    return Resolution(kind=kind, canonical=col.name, table=table.name)


def _parse_ref(text: str, where: str) -> ColumnRef:
    parts = text.split(".")
    if len(parts) != 2 or not parts[0] or not parts[1]:
        raise SchemaError(f"{where}: key reference {text!r} is not 'table.column'")
    return ColumnRef(table=parts[0], column=parts[1])


def _canonical_ref(schema_tables: tuple[Table, ...], ref: ColumnRef, where: str) -> ColumnRef:
    for table in schema_tables:
        if _fold(table.name) == _fold(ref.table):
            for col in table.columns:
                if _fold(col.name) == _fold(ref.column):
                    return ColumnRef(table=table.name, column=col.name)
            raise SchemaError(f"{where}: key reference {ref!s} names an unknown column")
    raise SchemaError(f"{where}: key reference {ref!s} names an unknown table")


def load_schema(source: str | Path | dict) -> DatabaseSchema:
    """Load one schema from a native JSON document, path, or parsed dict.

    The native document shape is ``{"database": str, "metadata": [{"name":
    str, "columns": [str, ...], "types"?: [str, ...]}], "primary_keys"?:
    ["table.column", ...], "foreign_keys"?: [["table.column",
    "table.column"], ...]}``. Errors carry the offending location.
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise SchemaError(f"cannot read schema file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON: {exc}") from exc
        where = str(path)
    else:
        doc = source
        where = "<document>"
    if not isinstance(doc, dict):
        raise SchemaError(f"{where}: schema document must be a JSON object")

    name = doc.get("database")
    if not isinstance(name, str) or not name:
        raise SchemaError(f"{where}: 'database' must be a non-empty string")
    metadata = doc.get("metadata")
    if not isinstance(metadata, list) or not metadata:
        raise SchemaError(f"{where}: 'metadata' must be a non-empty list")

    tables: list[Table] = []
    for i, entry in enumerate(metadata):
        loc = f"{where}: metadata[{i}]"
        if not isinstance(entry, dict):
            raise SchemaError(f"{loc} must be an object")
        t_name = entry.get("name")
        if not isinstance(t_name, str) or not t_name:
            raise SchemaError(f"{loc}: 'name' must be a non-empty string")
        cols = entry.get("columns")
        if not isinstance(cols, list) or not cols:
            raise SchemaError(f"{loc} ({t_name}): 'columns' must be a non-empty list")
        types = entry.get("types")
        if types is not None:
            if not isinstance(types, list) or len(types) != len(cols):
                raise SchemaError(
                    f"{loc} ({t_name}): 'types' must match 'columns' in length"
                )
        columns: list[Column] = []
        for j, col_name in enumerate(cols):
            if not isinstance(col_name, str) or not col_name:
                raise SchemaError(
                    f"{loc} ({t_name}): columns[{j}] must be a non-empty string"
                )
            data_type = "other"
            if types is not None:
                data_type = types[j]
                if data_type not in DATA_TYPES:
                    raise SchemaError(
                        f"{loc} ({t_name}): columns[{j}] has unknown type {data_type!r}"
                    )
            columns.append(Column(name=col_name, data_type=data_type))
        try:
            tables.append(Table(name=t_name, columns=tuple(columns)))
        except SchemaError as exc:
            raise SchemaError(f"{loc}: {exc}") from exc

    table_tuple = tuple(tables)
    primary_keys = []
    for i, text in enumerate(doc.get("primary_keys", ())):
        loc = f"{where}: primary_keys[{i}]"
        if not isinstance(text, str):
            raise SchemaError(f"{loc} must be a 'table.column' string")
        primary_keys.append(_canonical_ref(table_tuple, _parse_ref(text, loc), loc))
    foreign_keys = []
    for i, pair in enumerate(doc.get("foreign_keys", ())):
        loc = f"{where}: foreign_keys[{i}]"
        if (
            not isinstance(pair, (list, tuple))
            or len(pair) != 2
            or not all(isinstance(p, str) for p in pair)
        ):
            raise SchemaError(f"{loc} must be a pair of 'table.column' strings")
        foreign_keys.append(
            (
                _canonical_ref(table_tuple, _parse_ref(pair[0], loc), loc),
                _canonical_ref(table_tuple, _parse_ref(pair[1], loc), loc),
            )
        )

    try:
        return DatabaseSchema(
            name=name,
            tables=table_tuple,
            primary_keys=tuple(primary_keys),
            foreign_keys=tuple(foreign_keys),
        )
    except SchemaError as exc:
        raise SchemaError(f"{where}: {exc}") from exc


def serialize(schema: DatabaseSchema) -> dict:
    """Serialize a schema back to the native document shape.

    load_schema(serialize(s)) reconstructs an equal schema.
    """
    doc: dict = {
        "database": schema.name,
        "metadata": [
            {
                "name": table.name,
                "columns": list(table.column_names()),
                "types": [col.data_type for col in table.columns],
            }
            for table in schema.tables
        ],
    }
    if schema.primary_keys:
        doc["primary_keys"] = [str(ref) for ref in schema.primary_keys]
    if schema.foreign_keys:
        doc["foreign_keys"] = [[str(a), str(b)] for a, b in schema.foreign_keys]
    return doc


def load_spider_schemas(source: str | Path | list) -> "SchemaCatalog":
    """Import a SPIDER tables.json file (or its parsed list) into a catalog.

    Each entry contributes one schema keyed by db_id. Column and table names
    come from the *_original fields when present; SPIDER's coarse types are
    mapped via text->text, number->real, time->date, boolean->boolean,
    others->other.
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        try:
            entries = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise SchemaError(f"cannot read {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON: {exc}") from exc
        where = str(path)
    else:
        entries = source
        where = "<tables document>"
    if not isinstance(entries, list):
        raise SchemaError(f"{where}: expected a list of database entries")

    catalog = SchemaCatalog()
    for i, entry in enumerate(entries):
        loc = f"{where}: entry[{i}]"
        if not isinstance(entry, dict):
            raise SchemaError(f"{loc} must be an object")
        db_id = entry.get("db_id")
        if not isinstance(db_id, str) or not db_id:
            raise SchemaError(f"{loc}: 'db_id' must be a non-empty string")
        table_names = entry.get("table_names_original") or entry.get("table_names")
        column_names = entry.get("column_names_original") or entry.get("column_names")
        if not isinstance(table_names, list) or not isinstance(column_names, list):
            raise SchemaError(f"{loc} ({db_id}): missing table or column name lists")
        column_types = entry.get("column_types") or []

        per_table: dict[int, list[Column]] = {t: [] for t in range(len(table_names))}
        flat_refs: list[ColumnRef | None] = []
        for j, item in enumerate(column_names):
            if not isinstance(item, (list, tuple)) or len(item) != 2:
                raise SchemaError(
                    f"{loc} ({db_id}): column_names[{j}] must be [table_index, name]"
                )
            t_idx, col_name = item
            if t_idx == -1:
                flat_refs.append(None)
                continue
            if not isinstance(t_idx, int) or t_idx not in per_table:
                raise SchemaError(
                    f"{loc} ({db_id}): column_names[{j}] has bad table index {t_idx!r}"
                )
            spider_type = column_types[j] if j < len(column_types) else "others"
            data_type = _SPIDER_TYPE_MAP.get(spider_type, "other")
            per_table[t_idx].append(Column(name=col_name, data_type=data_type))
            flat_refs.append(ColumnRef(table=table_names[t_idx], column=col_name))

        tables = []
        for t_idx, t_name in enumerate(table_names):
            cols = per_table[t_idx]
            if not cols:
                raise SchemaError(f"{loc} ({db_id}): table {t_name!r} has no columns")
            tables.append(Table(name=t_name, columns=tuple(cols)))

        def ref_at(idx: int, what: str) -> ColumnRef:
            if not isinstance(idx, int) or not 0 <= idx < len(flat_refs):
                raise SchemaError(f"{loc} ({db_id}): {what} index {idx!r} out of range")
            ref = flat_refs[idx]
            if ref is None:
                raise SchemaError(f"{loc} ({db_id}): {what} references the '*' column")
            return ref

        primary_keys = tuple(
            ref_at(idx, "primary key") for idx in entry.get("primary_keys", ())
        )
        foreign_keys = []
        for pair in entry.get("foreign_keys", ()):
            if not isinstance(pair, (list, tuple)) or len(pair) != 2:
                raise SchemaError(f"{loc} ({db_id}): foreign key {pair!r} is not a pair")
            foreign_keys.append(
                (ref_at(pair[0], "foreign key"), ref_at(pair[1], "foreign key"))
            )

        try:
            catalog.add(
                DatabaseSchema(
                    name=db_id,
                    tables=tuple(tables),
                    primary_keys=primary_keys,
                    foreign_keys=tuple(foreign_keys),
                )
            )
        except SchemaError as exc:
            raise SchemaError(f"{loc}: {exc}") from exc
    return catalog


@dataclass
class SchemaCatalog:
    """A name-keyed collection of schemas; keys always equal schema.name."""

    _schemas: dict[str, DatabaseSchema] = field(default_factory=dict)

    def add(self, schema: DatabaseSchema) -> None:
        if schema.name in self._schemas:
            raise SchemaError(f"catalog already holds a schema named {schema.name!r}")
        self._schemas[schema.name] = schema

    def get(self, name: str) -> DatabaseSchema:
        try:
            return self._schemas[name]
        except KeyError:
            known = ", ".join(sorted(self._schemas)) or "<empty>"
            raise SchemaError(
                f"no schema named {name!r} in catalog (known: {known})"
            ) from None

    def __contains__(self, name: str) -> bool:
        return name in self._schemas

    def __iter__(self):
        return iter(self._schemas.values())

    def __len__(self) -> int:
        return len(self._schemas)

    def names(self) -> tuple[str, ...]:
        return tuple(self._schemas)

    @classmethod
    def from_schemas(cls, schemas) -> "SchemaCatalog":
        catalog = cls()
        for schema in schemas:
            catalog.add(schema)
        return catalog

    @classmethod
    def from_dir(cls, path: str | Path) -> "SchemaCatalog":
        """Load every *.json native schema document under a directory."""
        catalog = cls()
        root = Path(path)
        if not root.is_dir():
            raise SchemaError(f"schema directory {root} does not exist")
        for file in sorted(root.glob("*.json")):
            catalog.add(load_schema(file))
        return catalog

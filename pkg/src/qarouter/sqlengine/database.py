"""Schema definition and the CSV-backed in-memory database.

Schema file format (JSON)::

    {"tables": [{"name": "Procedures",
                 "columns": [{"name": "Name", "type": "text"},
                             {"name": "Cost", "type": "number"}]}]}

Each table reads from <data_dir>/<TableName>.csv, UTF-8 with a header row
matching the declared columns (case-insensitive, same order). Empty cells
load as null; number cells use dot-decimal parsing regardless of locale.
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path

from .errors import HeaderMismatch, InvalidSchema, MissingTableFile, NumericParseError

COLUMN_TYPES = ("text", "number")
_INT_RE = re.compile(r"[+-]?\d+$")

Value = str | int | float | None


@dataclass(frozen=True)
class Column:
    name: str
    type: str


@dataclass(frozen=True)
class Table:
    name: str
    columns: tuple[Column, ...]

    def column_index(self, name: str) -> int | None:
        lowered = name.lower()
        for i, column in enumerate(self.columns):
            if column.name.lower() == lowered:
                return i
        return None


@dataclass(frozen=True)
class Schema:
    tables: tuple[Table, ...]

    def find_table(self, name: str) -> Table | None:
        lowered = name.lower()
        for table in self.tables:
            if table.name.lower() == lowered:
                return table
        return None


def schema_from_dict(document: dict) -> Schema:
    """Build and validate a Schema from its JSON object form."""
    try:
        raw_tables = document["tables"]
    except (TypeError, KeyError):
        raise InvalidSchema("schema document must have a 'tables' list") from None
    if not isinstance(raw_tables, list) or not raw_tables:
        raise InvalidSchema("schema needs at least one table")

    tables = []
    seen_tables = set()
    for raw in raw_tables:
        name = raw.get("name")
        if not name or not isinstance(name, str):
            raise InvalidSchema("every table needs a nonempty name")
        if name.lower() in seen_tables:
            raise InvalidSchema(f"duplicate table name (case-insensitive): {name}")
        seen_tables.add(name.lower())
        raw_columns = raw.get("columns")
        if not raw_columns:
            raise InvalidSchema(f"table {name} needs at least one column")
        columns = []
        seen_columns = set()
        for raw_col in raw_columns:
            col_name, col_type = raw_col.get("name"), raw_col.get("type")
            if not col_name or col_type not in COLUMN_TYPES:
                raise InvalidSchema(
                    f"table {name}: column needs a name and a type in {COLUMN_TYPES}"
                )
            if col_name.lower() in seen_columns:
                raise InvalidSchema(f"table {name}: duplicate column {col_name}")
            seen_columns.add(col_name.lower())
            columns.append(Column(col_name, col_type))
        tables.append(Table(name, tuple(columns)))
    return Schema(tuple(tables))


def schema_to_dict(schema: Schema) -> dict:
    return {
        "tables": [
            {
                "name": table.name,
                "columns": [{"name": c.name, "type": c.type} for c in table.columns],
            }
            for table in schema.tables
        ]
    }


def load_schema(path: str | Path) -> Schema:
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidSchema(f"cannot read schema {path}: {exc}") from exc
    return schema_from_dict(document)


@dataclass(frozen=True)
class Database:
    schema: Schema
    rows: dict[str, tuple[tuple[Value, ...], ...]]  # keyed by lowercase table name

    def table_rows(self, name: str) -> tuple[tuple[Value, ...], ...]:
        return self.rows[name.lower()]


def _parse_number(text: str, where: str) -> int | float:
    if _INT_RE.match(text):
        return int(text)
    try:
        value = float(text)
    except ValueError:
        raise NumericParseError(f"{where}: not a dot-decimal number: {text!r}") from None
    if not math.isfinite(value):
        raise NumericParseError(f"{where}: number must be finite: {text!r}")
    return value


def load_csv_database(schema: Schema | str | Path, data_dir: str | Path) -> Database:
    """Load one CSV per schema table from data_dir."""
    if not isinstance(schema, Schema):
        schema = load_schema(schema)
    data_dir = Path(data_dir)

    rows: dict[str, tuple[tuple[Value, ...], ...]] = {}
    for table in schema.tables:
        path = data_dir / f"{table.name}.csv"
        if not path.is_file():
            raise MissingTableFile(f"no data file for table {table.name}: {path}")
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise HeaderMismatch(f"{path}: file is empty, expected a header row") from None
            expected = [c.name.lower() for c in table.columns]
            if [h.lower() for h in header] != expected:
                raise HeaderMismatch(
                    f"{path}: header {header} does not match declared columns "
                    f"{[c.name for c in table.columns]}"
                )
            table_rows = []
            for lineno, record in enumerate(reader, start=2):
                if len(record) != len(table.columns):
                    raise HeaderMismatch(
                        f"{path} line {lineno}: {len(record)} cells for "
                        f"{len(table.columns)} columns"
                    )
                values: list[Value] = []
                for column, cell in zip(table.columns, record):
                    if cell == "":
                        values.append(None)
                    elif column.type == "number":
                        values.append(_parse_number(cell, f"{path} line {lineno}"))
                    else:
                        values.append(cell)
                table_rows.append(tuple(values))
        rows[table.name.lower()] = tuple(table_rows)
    return Database(schema=schema, rows=rows)

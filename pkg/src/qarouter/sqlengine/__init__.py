"""SQL-subset engine: parse, validate and execute SELECT queries over an
in-memory database loaded from CSV files.

Grammar and semantics are documented in docs/sql-grammar.md. The subset
covers single-table and equi-join SELECTs with COUNT aggregates, WHERE
with AND/OR/parentheses, ORDER BY and LIMIT.
"""

from .database import (
    Column,
    Database,
    Schema,
    Table,
    load_csv_database,
    load_schema,
    schema_from_dict,
    schema_to_dict,
)
from .errors import (
    AmbiguousColumn,
    DuplicateTable,
    HeaderMismatch,
    InvalidProjection,
    InvalidSchema,
    MissingTableFile,
    NumericParseError,
    ResourceLimitExceeded,
    SqlEngineError,
    SqlSyntaxError,
    TypeMismatch,
    UnknownColumn,
    UnknownTable,
)
from .executor import ResultTable, execute, run_query
from .nodes import (
    BoolOp,
    ColumnRef,
    Comparison,
    CountDistinct,
    CountStar,
    Join,
    Literal,
    OrderBy,
    Query,
    print_sql,
)
from .parser import parse_sql
from .validator import ResolvedQuery, validate

__all__ = [
    "AmbiguousColumn", "BoolOp", "Column", "ColumnRef", "Comparison", "CountDistinct",
    "CountStar", "Database", "DuplicateTable", "HeaderMismatch", "InvalidProjection",
    "InvalidSchema", "Join", "Literal", "MissingTableFile", "NumericParseError",
    "OrderBy", "Query", "ResolvedQuery", "ResourceLimitExceeded", "ResultTable",
    "Schema", "SqlEngineError", "SqlSyntaxError", "Table", "TypeMismatch",
    "UnknownColumn", "UnknownTable", "execute", "load_csv_database", "load_schema",
    "parse_sql", "print_sql", "run_query", "schema_from_dict", "schema_to_dict",
    "validate",
]

"""Name resolution and type checking: Query AST + Schema -> ResolvedQuery.

Resolution is case-insensitive but the resolved plan keeps the declared
casing for display. The scope grows join by join, so an ON clause can see
the joined table and everything before it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .database import Schema, Table
from .errors import (
    AmbiguousColumn,
    DuplicateTable,
    InvalidProjection,
    TypeMismatch,
    UnknownColumn,
    UnknownTable,
)
from .nodes import BoolOp, ColumnRef, Comparison, CountDistinct, CountStar, Literal, Query


@dataclass(frozen=True)
class ResolvedColumn:
    source: int  # scope position (0 = FROM table)
    column: int
    table_name: str
    column_name: str
    type: str

    @property
    def display(self) -> str:
        return f"{self.table_name}.{self.column_name}"


@dataclass(frozen=True)
class ResolvedLiteral:
    value: str | int | float
    kind: str


ResolvedOperand = Union[ResolvedColumn, ResolvedLiteral]


@dataclass(frozen=True)
class ResolvedComparison:
    op: str
    left: ResolvedColumn
    right: ResolvedOperand


@dataclass(frozen=True)
class ResolvedBoolOp:
    op: str  # AND | OR
    left: "ResolvedExpr"
    right: "ResolvedExpr"


ResolvedExpr = Union[ResolvedComparison, ResolvedBoolOp]


@dataclass(frozen=True)
class ResolvedQuery:
    tables: tuple[str, ...]  # display names, scope order
    joins: tuple[tuple[ResolvedColumn, ResolvedColumn], ...]
    where: ResolvedExpr | None
    projections: tuple  # ("column", rc) | ("count_star",) | ("count_distinct", rc)
    distinct: bool
    order_by: tuple[ResolvedColumn, bool] | None  # (column, descending)
    limit: int | None
    headers: tuple[str, ...]


class _Scope:
    def __init__(self, schema: Schema):
        self.schema = schema
        self.tables: list[Table] = []

    def add_table(self, name: str) -> Table:
        table = self.schema.find_table(name)
        if table is None:
            raise UnknownTable(name)
        if any(t.name.lower() == table.name.lower() for t in self.tables):
            raise DuplicateTable(name)
        self.tables.append(table)
        return table

    def resolve(self, ref: ColumnRef) -> ResolvedColumn:
        if ref.table is not None:
            wanted = ref.table.lower()
            for source, table in enumerate(self.tables):
                if table.name.lower() == wanted:
                    index = table.column_index(ref.column)
                    if index is None:
                        raise UnknownColumn(f"{ref.table}.{ref.column}")
                    column = table.columns[index]
                    return ResolvedColumn(source, index, table.name, column.name, column.type)
            raise UnknownTable(ref.table)
        hits = []
        for source, table in enumerate(self.tables):
            index = table.column_index(ref.column)
            if index is not None:
                hits.append((source, table, index))
        if not hits:
            raise UnknownColumn(ref.column)
        if len(hits) > 1:
            raise AmbiguousColumn(ref.column, [t.name for _, t, _ in hits])
        source, table, index = hits[0]
        column = table.columns[index]
        return ResolvedColumn(source, index, table.name, column.name, column.type)


def _resolve_expr(expr, scope: _Scope) -> ResolvedExpr:
    if isinstance(expr, BoolOp):
        return ResolvedBoolOp(expr.op, _resolve_expr(expr.left, scope), _resolve_expr(expr.right, scope))
    assert isinstance(expr, Comparison)
    left = scope.resolve(expr.left)
    if isinstance(expr.right, Literal):
        if expr.right.kind != left.type:
            raise TypeMismatch(
                f"cannot compare {left.display} ({left.type}) with "
                f"{expr.right.sql()} ({expr.right.kind})"
            )
        right: ResolvedOperand = ResolvedLiteral(expr.right.value, expr.right.kind)
    else:
        right = scope.resolve(expr.right)
        if right.type != left.type:
            raise TypeMismatch(
                f"cannot compare {left.display} ({left.type}) with "
                f"{right.display} ({right.type})"
            )
    return ResolvedComparison(expr.op, left, right)


def validate(query: Query, schema: Schema) -> ResolvedQuery:
    """Resolve every name in the query against the schema or fail loudly."""
    scope = _Scope(schema)
    scope.add_table(query.from_table)

    joins = []
    for join in query.joins:
        scope.add_table(join.table)
        left = scope.resolve(join.left)
        right = scope.resolve(join.right)
        if left.type != right.type:
            raise TypeMismatch(
                f"join compares {left.display} ({left.type}) with "
                f"{right.display} ({right.type})"
            )
        joins.append((left, right))

    where = _resolve_expr(query.where, scope) if query.where is not None else None

    projections = []
    headers = []
    aggregate_count = 0
    for projection in query.projections:
        if isinstance(projection, CountStar):
            projections.append(("count_star",))
            headers.append("COUNT(*)")
            aggregate_count += 1
        elif isinstance(projection, CountDistinct):
            resolved = scope.resolve(projection.column)
            projections.append(("count_distinct", resolved))
            headers.append(f"COUNT(DISTINCT {resolved.display})")
            aggregate_count += 1
        else:
            resolved = scope.resolve(projection)
            projections.append(("column", resolved))
            headers.append(resolved.column_name)

    if aggregate_count and aggregate_count != len(projections):
        raise InvalidProjection("cannot mix COUNT aggregates with plain columns")
    if aggregate_count and query.distinct:
        raise InvalidProjection("SELECT DISTINCT cannot wrap COUNT aggregates")
    if aggregate_count and query.order_by is not None:
        raise InvalidProjection("ORDER BY cannot apply to an aggregate-only result")

    order_by = None
    if query.order_by is not None:
        order_by = (scope.resolve(query.order_by.column), query.order_by.descending)

    return ResolvedQuery(
        tables=tuple(t.name for t in scope.tables),
        joins=tuple(joins),
        where=where,
        projections=tuple(projections),
        distinct=query.distinct,
        order_by=order_by,
        limit=query.limit,
        headers=tuple(headers),
    )

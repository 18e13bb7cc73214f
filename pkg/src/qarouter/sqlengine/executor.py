"""Query execution over the in-memory database.

Semantics of the subset:
- inner joins by nested loop, in declared order;
- WHERE under three-valued logic (comparisons with null are unknown,
  only rows evaluating to true survive);
- COUNT(*) counts surviving rows, COUNT(DISTINCT c) counts distinct
  non-null values;
- ORDER BY is a stable sort with nulls last (ascending and descending);
- DISTINCT deduplicates projected rows keeping first occurrence;
- LIMIT truncates after ordering.

A row cap bounds intermediate nested-loop growth; the default allows a
million intermediate rows, plenty for desk-scale databases.
"""

from __future__ import annotations

from dataclasses import dataclass

from .database import Database, Value
from .errors import ResourceLimitExceeded
from .validator import (
    ResolvedBoolOp,
    ResolvedColumn,
    ResolvedComparison,
    ResolvedLiteral,
    ResolvedQuery,
)

DEFAULT_ROW_CAP = 1_000_000


@dataclass(frozen=True)
class ResultTable:
    headers: tuple[str, ...]
    rows: tuple[tuple[Value, ...], ...]


def _compare(op: str, left: Value, right: Value) -> bool | None:
    """Three-valued comparison: None operand means unknown."""
    if left is None or right is None:
        return None
    if op == "=":
        return left == right
    if op == "!=":
        return left != right
    if op == "<":
        return left < right
    if op == "<=":
        return left <= right
    if op == ">":
        return left > right
    if op == ">=":
        return left >= right
    raise AssertionError(f"unknown operator {op!r}")


def _cell(row: tuple, ref: ResolvedColumn) -> Value:
    return row[ref.source][ref.column]


def _evaluate(expr, row: tuple) -> bool | None:
    if isinstance(expr, ResolvedComparison):
        left = _cell(row, expr.left)
        right = expr.right.value if isinstance(expr.right, ResolvedLiteral) else _cell(row, expr.right)
        return _compare(expr.op, left, right)
    assert isinstance(expr, ResolvedBoolOp)
    left = _evaluate(expr.left, row)
    right = _evaluate(expr.right, row)
    if expr.op == "AND":
        if left is False or right is False:
            return False
        if left is None or right is None:
            return None
        return True
    if left is True or right is True:
        return True
    if left is None or right is None:
        return None
    return False


def execute(plan: ResolvedQuery, database: Database, row_cap: int = DEFAULT_ROW_CAP) -> ResultTable:
    """Run a validated plan. The only failure mode is the row cap."""
    sources = [database.table_rows(name) for name in plan.tables]

    rows: list[tuple] = [(r,) for r in sources[0]]
    if len(rows) > row_cap:
        raise ResourceLimitExceeded(f"{len(rows)} rows exceed the cap of {row_cap}")

    for join_index, (left, right) in enumerate(plan.joins):
        next_rows = sources[join_index + 1]
        if len(rows) * max(len(next_rows), 1) > row_cap:
            raise ResourceLimitExceeded(
                f"join would build {len(rows) * len(next_rows)} intermediate rows "
                f"(cap {row_cap})"
            )
        joined = []
        for row in rows:
            for extra in next_rows:
                candidate = row + (extra,)
                if _compare("=", _cell(candidate, left), _cell(candidate, right)) is True:
                    joined.append(candidate)
        rows = joined

    if plan.where is not None:
        rows = [row for row in rows if _evaluate(plan.where, row) is True]

    if plan.projections and plan.projections[0][0] != "column":
        aggregates = []
        for projection in plan.projections:
            if projection[0] == "count_star":
                aggregates.append(len(rows))
            else:
                ref = projection[1]
                aggregates.append(len({_cell(row, ref) for row in rows if _cell(row, ref) is not None}))
        result_rows: list[tuple[Value, ...]] = [tuple(aggregates)]
        if plan.limit is not None:
            result_rows = result_rows[: plan.limit]
        return ResultTable(plan.headers, tuple(result_rows))

    if plan.order_by is not None:
        ref, descending = plan.order_by
        non_null = [row for row in rows if _cell(row, ref) is not None]
        nulls = [row for row in rows if _cell(row, ref) is None]
        non_null.sort(key=lambda row: _cell(row, ref), reverse=descending)
        rows = non_null + nulls

    projected = [tuple(_cell(row, p[1]) for p in plan.projections) for row in rows]

    if plan.distinct:
        seen = set()
        unique = []
        for row in projected:
            if row not in seen:
                seen.add(row)
                unique.append(row)
        projected = unique

    if plan.limit is not None:
        projected = projected[: plan.limit]
    return ResultTable(plan.headers, tuple(projected))


def run_query(sql: str, database: Database, row_cap: int = DEFAULT_ROW_CAP) -> ResultTable:
    """parse + validate + execute in one call."""
    from .parser import parse_sql
    from .validator import validate

    plan = validate(parse_sql(sql), database.schema)
    return execute(plan, database, row_cap)

"""AST for the SELECT subset, plus the canonical printer.

print_sql and parse_sql round-trip: parsing the printed form of any AST
yields a structurally equal AST.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union


@dataclass(frozen=True)
class ColumnRef:
    table: str | None
    column: str

    def sql(self) -> str:
        return f"{self.table}.{self.column}" if self.table else self.column


@dataclass(frozen=True)
class Literal:
    value: str | int | float
    kind: str  # "text" | "number"

    def sql(self) -> str:
        if self.kind == "text":
            escaped = str(self.value).replace("'", "''")
            return f"'{escaped}'"
        return repr(self.value) if isinstance(self.value, float) else str(self.value)


@dataclass(frozen=True)
class CountStar:
    def sql(self) -> str:
        return "COUNT(*)"


@dataclass(frozen=True)
class CountDistinct:
    column: ColumnRef

    def sql(self) -> str:
        return f"COUNT(DISTINCT {self.column.sql()})"


Projection = Union[ColumnRef, CountStar, CountDistinct]


@dataclass(frozen=True)
class Comparison:
    left: ColumnRef
    op: str  # = != < <= > >=
    right: ColumnRef | Literal


@dataclass(frozen=True)
class BoolOp:
    op: str  # AND | OR
    left: "BoolExpr"
    right: "BoolExpr"


BoolExpr = Union[Comparison, BoolOp]


@dataclass(frozen=True)
class Join:
    table: str
    left: ColumnRef
    right: ColumnRef


@dataclass(frozen=True)
class OrderBy:
    column: ColumnRef
    descending: bool = False


@dataclass(frozen=True)
class Query:
    projections: tuple[Projection, ...]
    from_table: str
    distinct: bool = False
    joins: tuple[Join, ...] = ()
    where: BoolExpr | None = None
    order_by: OrderBy | None = None
    limit: int | None = None


_PRECEDENCE = {"OR": 1, "AND": 2}


def _print_expr(node: BoolExpr, parent_prec: int = 0, right_side: bool = False) -> str:
    if isinstance(node, Comparison):
        return f"{node.left.sql()} {node.op} {node.right.sql()}"
    prec = _PRECEDENCE[node.op]
    text = (
        f"{_print_expr(node.left, prec, False)} {node.op} "
        f"{_print_expr(node.right, prec, True)}"
    )
    # parenthesize when binding looser than the parent, or when this node sits
    # on the right of an equal-precedence parent (parser is left-associative)
    if prec < parent_prec or (prec == parent_prec and right_side):
        return f"({text})"
    return text


def print_sql(query: Query) -> str:
    """Canonical text form (uppercase keywords, minimal parentheses)."""
    parts = ["SELECT "]
    if query.distinct:
        parts.append("DISTINCT ")
    parts.append(", ".join(p.sql() for p in query.projections))
    parts.append(f" FROM {query.from_table}")
    for join in query.joins:
        parts.append(f" JOIN {join.table} ON {join.left.sql()} = {join.right.sql()}")
    if query.where is not None:
        parts.append(f" WHERE {_print_expr(query.where)}")
    if query.order_by is not None:
        direction = "DESC" if query.order_by.descending else "ASC"
        parts.append(f" ORDER BY {query.order_by.column.sql()} {direction}")
    if query.limit is not None:
        parts.append(f" LIMIT {query.limit}")
    return "".join(parts)

"""SQL engine errors; all derive from the package-wide base so the pipeline
can catch one class."""

from ..errors import QaRouterError


class SqlEngineError(QaRouterError):
    """Base for every SQL engine failure."""


class SqlSyntaxError(SqlEngineError):
    """Parse failure, carrying the byte offset and the expected-token set."""

    def __init__(self, offset: int, expected: set[str], found: str):
        self.offset = offset
        self.expected = frozenset(expected)
        self.found = found
        wanted = ", ".join(sorted(expected))
        super().__init__(f"at offset {offset}: expected {wanted}, found {found}")


class UnknownTable(SqlEngineError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown table: {name}")


class UnknownColumn(SqlEngineError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown column: {name}")


class AmbiguousColumn(SqlEngineError):
    def __init__(self, name: str, tables: list[str]):
        self.name = name
        super().__init__(f"column {name} is ambiguous between tables: {', '.join(tables)}")


class TypeMismatch(SqlEngineError):
    def __init__(self, detail: str):
        super().__init__(detail)


class DuplicateTable(SqlEngineError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"table {name} appears twice (aliases are not supported)")


class InvalidProjection(SqlEngineError):
    """Aggregates mixed with plain columns, or DISTINCT/ORDER BY over an aggregate."""


class InvalidSchema(SqlEngineError):
    pass


class MissingTableFile(SqlEngineError):
    pass


class HeaderMismatch(SqlEngineError):
    pass


class NumericParseError(SqlEngineError):
    pass


class ResourceLimitExceeded(SqlEngineError):
    pass

"""Recursive-descent parser for the SELECT subset.

Keywords are case-insensitive and reserved (they cannot name tables or
columns). String literals are single-quoted with '' as the escape. Errors
carry the byte offset and the set of tokens that would have been accepted.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import SqlSyntaxError
from .nodes import (
    BoolExpr,
    BoolOp,
    ColumnRef,
    Comparison,
    CountDistinct,
    CountStar,
    Join,
    Literal,
    OrderBy,
    Query,
)

KEYWORDS = {
    "SELECT", "DISTINCT", "COUNT", "FROM", "JOIN", "ON", "WHERE",
    "AND", "OR", "ORDER", "BY", "ASC", "DESC", "LIMIT",
}

_SYMBOLS = ("<=", ">=", "!=", "=", "<", ">", "(", ")", ",", ".", "*")
_COMPARISON_OPS = ("=", "!=", "<", "<=", ">", ">=")


@dataclass(frozen=True)
class Token:
    type: str  # IDENT NUMBER STRING SYMBOL EOF
    value: str
    offset: int


def _lex(text: str) -> list[Token]:
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "'":
            j = i + 1
            chunks = []
            while True:
                if j >= n:
                    raise SqlSyntaxError(i, {"closing quote"}, "end of input")
                if text[j] == "'":
                    if j + 1 < n and text[j + 1] == "'":
                        chunks.append("'")
                        j += 2
                        continue
                    break
                chunks.append(text[j])
                j += 1
            tokens.append(Token("STRING", "".join(chunks), i))
            i = j + 1
            continue
        if ch.isdigit() or (ch == "-" and i + 1 < n and text[i + 1].isdigit()):
            j = i + 1
            seen_dot = False
            while j < n and (text[j].isdigit() or (text[j] == "." and not seen_dot)):
                if text[j] == ".":
                    # a dot not followed by a digit belongs to the next token
                    if j + 1 >= n or not text[j + 1].isdigit():
                        break
                    seen_dot = True
                j += 1
            tokens.append(Token("NUMBER", text[i:j], i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(Token("IDENT", text[i:j], i))
            i = j
            continue
        for symbol in _SYMBOLS:
            if text.startswith(symbol, i):
                tokens.append(Token("SYMBOL", symbol, i))
                i += len(symbol)
                break
        else:
            raise SqlSyntaxError(i, {"a token"}, repr(ch))
    tokens.append(Token("EOF", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _lex(text)
        self.pos = 0

    # --- token plumbing ---

    def current(self) -> Token:
        return self.tokens[self.pos]

    def error(self, expected: set[str]) -> SqlSyntaxError:
        token = self.current()
        found = "end of input" if token.type == "EOF" else repr(token.value)
        return SqlSyntaxError(token.offset, expected, found)

    def at_keyword(self, word: str) -> bool:
        token = self.current()
        return token.type == "IDENT" and token.value.upper() == word

    def eat_keyword(self, word: str) -> None:
        if not self.at_keyword(word):
            raise self.error({word})
        self.pos += 1

    def try_keyword(self, word: str) -> bool:
        if self.at_keyword(word):
            self.pos += 1
            return True
        return False

    def at_symbol(self, symbol: str) -> bool:
        token = self.current()
        return token.type == "SYMBOL" and token.value == symbol

    def eat_symbol(self, symbol: str) -> None:
        if not self.at_symbol(symbol):
            raise self.error({repr(symbol)})
        self.pos += 1

    def try_symbol(self, symbol: str) -> bool:
        if self.at_symbol(symbol):
            self.pos += 1
            return True
        return False

    def eat_name(self, what: str) -> str:
        token = self.current()
        if token.type != "IDENT" or token.value.upper() in KEYWORDS:
            raise self.error({what})
        self.pos += 1
        return token.value

    # --- grammar ---

    def parse(self) -> Query:
        self.eat_keyword("SELECT")
        distinct = self.try_keyword("DISTINCT")
        projections = [self.projection()]
        while self.try_symbol(","):
            projections.append(self.projection())
        self.eat_keyword("FROM")
        from_table = self.eat_name("table name")

        joins = []
        while self.try_keyword("JOIN"):
            table = self.eat_name("table name")
            self.eat_keyword("ON")
            left = self.column_ref()
            self.eat_symbol("=")
            right = self.column_ref()
            joins.append(Join(table, left, right))

        where = None
        if self.try_keyword("WHERE"):
            where = self.or_expr()

        order_by = None
        if self.try_keyword("ORDER"):
            self.eat_keyword("BY")
            column = self.column_ref()
            descending = False
            if self.try_keyword("DESC"):
                descending = True
            else:
                self.try_keyword("ASC")
            order_by = OrderBy(column, descending)

        limit = None
        if self.try_keyword("LIMIT"):
            token = self.current()
            if token.type != "NUMBER" or not token.value.isdigit():
                raise self.error({"nonnegative integer"})
            self.pos += 1
            limit = int(token.value)

        if self.current().type != "EOF":
            raise self.error({"end of query"})
        return Query(
            projections=tuple(projections),
            from_table=from_table,
            distinct=distinct,
            joins=tuple(joins),
            where=where,
            order_by=order_by,
            limit=limit,
        )

    def projection(self):
        if self.at_keyword("COUNT"):
            self.pos += 1
            self.eat_symbol("(")
            if self.try_symbol("*"):
                self.eat_symbol(")")
                return CountStar()
            self.eat_keyword("DISTINCT")
            column = self.column_ref()
            self.eat_symbol(")")
            return CountDistinct(column)
        if self.current().type == "IDENT" and self.current().value.upper() not in KEYWORDS:
            return self.column_ref()
        raise self.error({"column name", "COUNT"})

    def column_ref(self) -> ColumnRef:
        first = self.eat_name("column name")
        if self.try_symbol("."):
            second = self.eat_name("column name")
            return ColumnRef(first, second)
        return ColumnRef(None, first)

    def or_expr(self) -> BoolExpr:
        node = self.and_expr()
        while self.try_keyword("OR"):
            node = BoolOp("OR", node, self.and_expr())
        return node

    def and_expr(self) -> BoolExpr:
        node = self.primary()
        while self.try_keyword("AND"):
            node = BoolOp("AND", node, self.primary())
        return node

    def primary(self) -> BoolExpr:
        if self.try_symbol("("):
            node = self.or_expr()
            self.eat_symbol(")")
            return node
        return self.comparison()

    def comparison(self) -> Comparison:
        left = self.column_ref()
        token = self.current()
        if token.type != "SYMBOL" or token.value not in _COMPARISON_OPS:
            raise self.error(set(_COMPARISON_OPS))
        self.pos += 1
        return Comparison(left, token.value, self.comparand())

    def comparand(self) -> ColumnRef | Literal:
        token = self.current()
        if token.type == "NUMBER":
            self.pos += 1
            value = float(token.value) if "." in token.value else int(token.value)
            return Literal(value, "number")
        if token.type == "STRING":
            self.pos += 1
            return Literal(token.value, "text")
        if token.type == "IDENT" and token.value.upper() not in KEYWORDS:
            return self.column_ref()
        raise self.error({"number", "string literal", "column name"})


def parse_sql(text: str) -> Query:
    """Parse one SELECT statement; raises SqlSyntaxError with byte offset."""
    return _Parser(text).parse()

"""Recursive-descent parser for SQLite SELECT statements."""

from __future__ import annotations

from typing import Optional

from . import nodes as n
from .tokens import (
    BLOB,
    EOF,
    NAME,
    NUMBER,
    OP,
    PARAM,
    PUNCT,
    QNAME,
    STRING,
    Token,
    TokenizeError,
    tokenize,
)


class ParseError(Exception):
    """Malformed SQL. Carries the offending position."""

    def __init__(self, message: str, pos: int = 0, line: int = 1, col: int = 1):
        super().__init__(f"{message} (line {line}, column {col})")
        self.message = message
        self.pos = pos
        self.line = line
        self.col = col


# Words that terminate an expression / cannot start a table or column name.
_RESERVED = {
    "SELECT", "FROM", "WHERE", "GROUP", "HAVING", "ORDER", "LIMIT", "OFFSET",
    "UNION", "INTERSECT", "EXCEPT", "AS", "ON", "USING", "JOIN", "INNER",
    "LEFT", "RIGHT", "FULL", "OUTER", "CROSS", "NATURAL", "AND", "OR", "NOT",
    "IN", "IS", "BETWEEN", "LIKE", "GLOB", "REGEXP", "MATCH", "ESCAPE",
    "CASE", "WHEN", "THEN", "ELSE", "END", "CAST", "EXISTS", "DISTINCT",
    "ALL", "COLLATE", "ASC", "DESC", "NULLS", "WITH", "RECURSIVE", "VALUES",
    "WINDOW", "OVER", "PARTITION", "BY", "FILTER", "ISNULL", "NOTNULL",
}

_JOIN_TYPES = {"INNER", "LEFT", "RIGHT", "FULL", "CROSS"}

_COMPARE_OPS = {"=", "==", "!=", "<>", "<", "<=", ">", ">="}


def parse_sql(text: str) -> n.SelectStmt:
    """Parse one SELECT/WITH/VALUES statement; raise ParseError otherwise."""
    if not text or not text.strip():
        raise ParseError("empty SQL text")
    try:
        tokens = tokenize(text)
    except TokenizeError as exc:
        raise ParseError(exc.message, exc.pos, exc.line, exc.col) from exc
    return _Parser(tokens).parse_statement()


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0

    # -- token helpers ------------------------------------------------------

    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.i]
        if tok.kind != EOF:
            self.i += 1
        return tok

    def at_kw(self, *words: str) -> bool:
        tok = self.peek()
        return tok.kind == NAME and tok.upper() in words

    def take_kw(self, *words: str) -> bool:
        if self.at_kw(*words):
            self.next()
            return True
        return False

    def expect_kw(self, word: str) -> Token:
        if not self.at_kw(word):
            raise self.error(f"expected {word}")
        return self.next()

    def at_punct(self, ch: str) -> bool:
        tok = self.peek()
        return tok.kind == PUNCT and tok.text == ch

    def take_punct(self, ch: str) -> bool:
        if self.at_punct(ch):
            self.next()
            return True
        return False

    def expect_punct(self, ch: str) -> Token:
        if not self.at_punct(ch):
            raise self.error(f"expected {ch!r}")
        return self.next()

    def at_op(self, *ops: str) -> bool:
        tok = self.peek()
        return tok.kind == OP and tok.text in ops

    def error(self, message: str) -> ParseError:
        tok = self.peek()
        found = tok.text if tok.kind != EOF else "end of input"
        return ParseError(f"{message}, found {found!r}", tok.pos, tok.line, tok.col)

    # -- statement ----------------------------------------------------------

    def parse_statement(self) -> n.SelectStmt:
        stmt = self.parse_select_stmt()
        self.take_punct(";")
        if self.peek().kind != EOF:
            raise self.error("unexpected trailing input")
        return stmt

    def parse_select_stmt(self) -> n.SelectStmt:
        stmt = n.SelectStmt()
        if self.take_kw("WITH"):
            stmt.recursive = self.take_kw("RECURSIVE")
            stmt.ctes.append(self.parse_cte())
            while self.take_punct(","):
                stmt.ctes.append(self.parse_cte())

        stmt.cores.append(self.parse_core())
        while self.at_kw("UNION", "INTERSECT", "EXCEPT"):
            op = self.next().upper()
            if op == "UNION" and self.take_kw("ALL"):
                op = "UNION ALL"
            stmt.compound_ops.append(op)
            stmt.cores.append(self.parse_core())

        if self.at_kw("ORDER"):
            self.next()
            self.expect_kw("BY")
            stmt.order_by.append(self.parse_ordering_term())
            while self.take_punct(","):
                stmt.order_by.append(self.parse_ordering_term())

        if self.take_kw("LIMIT"):
            first = self.parse_expr()
            if self.take_kw("OFFSET"):
                stmt.limit = first
                stmt.offset = self.parse_expr()
            elif self.take_punct(","):
                # LIMIT offset, count
                stmt.offset = first
                stmt.limit = self.parse_expr()
            else:
                stmt.limit = first
        return stmt

    def parse_cte(self) -> n.CTE:
        name = self.parse_name("CTE name")
        columns: list[str] = []
        if self.take_punct("("):
            columns.append(self.parse_name("column name"))
            while self.take_punct(","):
                columns.append(self.parse_name("column name"))
            self.expect_punct(")")
        self.expect_kw("AS")
        # SQLite allows [NOT] MATERIALIZED here
        if self.take_kw("NOT"):
            self.expect_kw("MATERIALIZED")
        else:
            self.take_kw("MATERIALIZED")
        self.expect_punct("(")
        select = self.parse_select_stmt()
        self.expect_punct(")")
        return n.CTE(name=name, columns=columns, select=select)

    def parse_core(self) -> n.SelectCore | n.ValuesCore:
        if self.at_kw("VALUES"):
            self.next()
            core = n.ValuesCore()
            core.rows.append(self.parse_paren_expr_list())
            while self.take_punct(","):
                core.rows.append(self.parse_paren_expr_list())
            return core

        self.expect_kw("SELECT")
        core = n.SelectCore()
        if self.take_kw("DISTINCT"):
            core.distinct = True
        else:
            self.take_kw("ALL")

        core.projections.append(self.parse_result_col())
        while self.take_punct(","):
            core.projections.append(self.parse_result_col())

        if self.take_kw("FROM"):
            core.from_item = self.parse_from()
        if self.take_kw("WHERE"):
            core.where = self.parse_expr()
        if self.at_kw("GROUP"):
            self.next()
            self.expect_kw("BY")
            core.group_by.append(self.parse_expr())
            while self.take_punct(","):
                core.group_by.append(self.parse_expr())
        if self.take_kw("HAVING"):
            core.having = self.parse_expr()
        if self.take_kw("WINDOW"):
            while True:
                wname = self.parse_name("window name")
                self.expect_kw("AS")
                self.expect_punct("(")
                core.windows[wname.lower()] = self.parse_window_spec()
                self.expect_punct(")")
                if not self.take_punct(","):
                    break
        return core

    def parse_paren_expr_list(self) -> list[n.Expr]:
        self.expect_punct("(")
        items = [self.parse_expr()]
        while self.take_punct(","):
            items.append(self.parse_expr())
        self.expect_punct(")")
        return items

    def parse_result_col(self) -> n.ResultCol:
        if self.at_op("*"):
            self.next()
            return n.Star()
        # table.* needs two tokens of lookahead
        if self.peek().kind in (NAME, QNAME) and self.peek(1).kind == PUNCT \
                and self.peek(1).text == "." and self.peek(2).kind == OP \
                and self.peek(2).text == "*":
            table = self.next().text
            self.next()
            self.next()
            return n.Star(table=table)
        expr = self.parse_expr()
        alias = self.parse_optional_alias()
        return n.ExprCol(expr=expr, alias=alias)

    def parse_optional_alias(self) -> Optional[str]:
        if self.take_kw("AS"):
            return self.parse_name("alias")
        tok = self.peek()
        if tok.kind == QNAME or (tok.kind == NAME and tok.upper() not in _RESERVED):
            self.next()
            return tok.text
        return None

    def parse_name(self, what: str) -> str:
        tok = self.peek()
        if tok.kind == QNAME:
            self.next()
            return tok.text
        if tok.kind == NAME and tok.upper() not in _RESERVED:
            self.next()
            return tok.text
        raise self.error(f"expected {what}")

    # -- FROM clause --------------------------------------------------------

    def parse_from(self) -> n.FromItem:
        item = self.parse_table_or_subquery()
        while True:
            if self.take_punct(","):
                right = self.parse_table_or_subquery()
                item = n.JoinClause(left=item, right=right, join_type="INNER")
                continue
            natural = False
            if self.at_kw("NATURAL"):
                natural = True
                self.next()
            join_type = None
            if self.at_kw(*_JOIN_TYPES):
                join_type = self.next().upper()
                self.take_kw("OUTER")
            if self.at_kw("JOIN"):
                self.next()
                jt = join_type or "INNER"
                if jt == "FULL":
                    jt = "FULL"
                right = self.parse_table_or_subquery()
                join = n.JoinClause(left=item, right=right, join_type=jt, natural=natural)
                if self.take_kw("ON"):
                    join.on = self.parse_expr()
                elif self.take_kw("USING"):
                    self.expect_punct("(")
                    join.using.append(self.parse_name("column name"))
                    while self.take_punct(","):
                        join.using.append(self.parse_name("column name"))
                    self.expect_punct(")")
                item = join
                continue
            if natural or join_type:
                raise self.error("expected JOIN")
            break
        return item

    def parse_table_or_subquery(self) -> n.FromItem:
        if self.at_punct("("):
            # Either a derived table or a parenthesized join expression.
            save = self.i
            self.next()
            if self.at_kw("SELECT", "WITH", "VALUES"):
                select = self.parse_select_stmt()
                self.expect_punct(")")
                alias = self.parse_optional_alias()
                return n.DerivedTable(select=select, alias=alias)
            self.i = save
            self.next()
            inner = self.parse_from()
            self.expect_punct(")")
            return inner
        name = self.parse_name("table name")
        # schema.table qualifier: keep the table part only
        if self.at_punct(".") and self.peek(1).kind in (NAME, QNAME):
            self.next()
            name = self.parse_name("table name")
        alias = self.parse_optional_alias()
        # table-valued functions and INDEXED BY are out of the modeled dialect
        if self.at_kw("INDEXED"):
            self.next()
            self.expect_kw("BY")
            self.parse_name("index name")
        elif self.at_kw("NOT") and self.peek(1).kind == NAME and self.peek(1).upper() == "INDEXED":
            self.next()
            self.next()
        return n.TableRef(name=name, alias=alias)

    # -- ORDER BY -----------------------------------------------------------

    def parse_ordering_term(self) -> n.OrderingTerm:
        expr = self.parse_expr()
        term = n.OrderingTerm(expr=expr)
        if self.take_kw("COLLATE"):
            term.collate = self.parse_name("collation name")
        if self.take_kw("ASC"):
            term.direction = "ASC"
        elif self.take_kw("DESC"):
            term.direction = "DESC"
        if self.take_kw("NULLS"):
            if self.take_kw("FIRST"):
                term.nulls = "FIRST"
            elif self.take_kw("LAST"):
                term.nulls = "LAST"
            else:
                raise self.error("expected FIRST or LAST")
        return term

    # -- expressions --------------------------------------------------------

    def parse_expr(self) -> n.Expr:
        return self.parse_or()

    def parse_or(self) -> n.Expr:
        left = self.parse_and()
        while self.at_kw("OR"):
            self.next()
            left = n.Binary(op="OR", left=left, right=self.parse_and())
        return left

    def parse_and(self) -> n.Expr:
        left = self.parse_not()
        while self.at_kw("AND"):
            self.next()
            left = n.Binary(op="AND", left=left, right=self.parse_not())
        return left

    def parse_not(self) -> n.Expr:
        if self.at_kw("NOT") and not (
            self.peek(1).kind == NAME and self.peek(1).upper() == "EXISTS"
        ):
            self.next()
            return n.Unary(op="NOT", operand=self.parse_not())
        return self.parse_predicate()

    def parse_predicate(self) -> n.Expr:
        left = self.parse_comparison()
        while True:
            if self.at_kw("ISNULL"):
                self.next()
                left = n.IsExpr(left=left, right=n.Literal("null", "NULL"))
                continue
            if self.at_kw("NOTNULL"):
                self.next()
                left = n.IsExpr(left=left, right=n.Literal("null", "NULL"), negated=True)
                continue
            if self.at_kw("IS"):
                self.next()
                negated = self.take_kw("NOT")
                # IS [NOT] DISTINCT FROM is equivalent to IS NOT / IS
                if self.take_kw("DISTINCT"):
                    self.expect_kw("FROM")
                    negated = not negated
                right = self.parse_comparison()
                left = n.IsExpr(left=left, right=right, negated=negated)
                continue
            negated = False
            save = self.i
            if self.at_kw("NOT"):
                self.next()
                negated = True
            if self.at_kw("BETWEEN"):
                self.next()
                low = self.parse_comparison()
                self.expect_kw("AND")
                high = self.parse_comparison()
                left = n.Between(expr=left, low=low, high=high, negated=negated)
                continue
            if self.at_kw("IN"):
                self.next()
                left = self.parse_in_rhs(left, negated)
                continue
            if self.at_kw("LIKE", "GLOB", "REGEXP", "MATCH"):
                op = self.next().upper()
                right = self.parse_comparison()
                escape = None
                if self.take_kw("ESCAPE"):
                    escape = self.parse_comparison()
                left = n.Like(op=op, left=left, right=right, escape=escape, negated=negated)
                continue
            if negated:
                self.i = save
            break
        return left

    def parse_in_rhs(self, left: n.Expr, negated: bool) -> n.Expr:
        if self.take_punct("("):
            if self.at_punct(")"):
                self.next()
                return n.InList(expr=left, items=[], negated=negated)
            if self.at_kw("SELECT", "WITH", "VALUES"):
                select = self.parse_select_stmt()
                self.expect_punct(")")
                return n.InSelect(expr=left, select=select, negated=negated)
            items = [self.parse_expr()]
            while self.take_punct(","):
                items.append(self.parse_expr())
            self.expect_punct(")")
            return n.InList(expr=left, items=items, negated=negated)
        table = self.parse_name("table name")
        return n.InTable(expr=left, table=table, negated=negated)

    def parse_comparison(self) -> n.Expr:
        left = self.parse_bitwise()
        while self.at_op(*_COMPARE_OPS):
            op = self.next().text
            left = n.Binary(op=op, left=left, right=self.parse_bitwise())
        return left

    def parse_bitwise(self) -> n.Expr:
        left = self.parse_concat()
        while self.at_op("<<", ">>", "&", "|"):
            op = self.next().text
            left = n.Binary(op=op, left=left, right=self.parse_concat())
        return left

    def parse_concat(self) -> n.Expr:
        left = self.parse_additive()
        while self.at_op("||", "->"):
            op = self.next().text
            left = n.Binary(op=op, left=left, right=self.parse_additive())
        return left

    def parse_additive(self) -> n.Expr:
        left = self.parse_multiplicative()
        while self.at_op("+", "-"):
            op = self.next().text
            left = n.Binary(op=op, left=left, right=self.parse_multiplicative())
        return left

    def parse_multiplicative(self) -> n.Expr:
        left = self.parse_unary()
        while self.at_op("*", "/", "%"):
            op = self.next().text
            left = n.Binary(op=op, left=left, right=self.parse_unary())
        return left

    def parse_unary(self) -> n.Expr:
        if self.at_op("-", "+", "~"):
            op = self.next().text
            return n.Unary(op=op, operand=self.parse_unary())
        return self.parse_primary()

    def parse_primary(self) -> n.Expr:
        tok = self.peek()

        if tok.kind == NUMBER:
            self.next()
            return n.Literal("number", tok.text)
        if tok.kind == STRING:
            self.next()
            return n.Literal("string", tok.text)
        if tok.kind == BLOB:
            self.next()
            return n.Literal("blob", tok.text)
        if tok.kind == PARAM:
            self.next()
            return n.Literal("param", tok.text)

        if self.at_punct("("):
            self.next()
            if self.at_kw("SELECT", "WITH", "VALUES"):
                select = self.parse_select_stmt()
                self.expect_punct(")")
                return n.ScalarSubquery(select=select)
            expr = self.parse_expr()
            if self.at_punct(","):
                # row value: carry through raw
                parts = [expr]
                while self.take_punct(","):
                    parts.append(self.parse_expr())
                self.expect_punct(")")
                return n.FuncCall(name="ROW", args=parts)
            self.expect_punct(")")
            return expr

        if tok.kind == NAME:
            word = tok.upper()
            if word == "NULL":
                self.next()
                return n.Literal("null", "NULL")
            if word in ("TRUE", "FALSE"):
                self.next()
                return n.Literal("bool", word)
            if word == "CURRENT_DATE" or word == "CURRENT_TIME" or word == "CURRENT_TIMESTAMP":
                self.next()
                return n.Literal("string", word)
            if word == "CAST":
                self.next()
                self.expect_punct("(")
                expr = self.parse_expr()
                self.expect_kw("AS")
                type_parts = [self.parse_name("type name")]
                while self.peek().kind in (NAME, QNAME) and not self.at_punct(")"):
                    if self.at_kw("AS"):
                        break
                    type_parts.append(self.next().text)
                if self.take_punct("("):
                    # typename(p[, s]) precision args, discarded
                    self.parse_expr()
                    if self.take_punct(","):
                        self.parse_expr()
                    self.expect_punct(")")
                self.expect_punct(")")
                return n.CastExpr(expr=expr, type_name=" ".join(type_parts))
            if word == "CASE":
                return self.parse_case()
            if word == "EXISTS":
                self.next()
                self.expect_punct("(")
                select = self.parse_select_stmt()
                self.expect_punct(")")
                return n.ExistsExpr(select=select)
            if word == "NOT" and self.peek(1).kind == NAME and self.peek(1).upper() == "EXISTS":
                self.next()
                self.next()
                self.expect_punct("(")
                select = self.parse_select_stmt()
                self.expect_punct(")")
                return n.ExistsExpr(select=select, negated=True)

        if tok.kind in (NAME, QNAME):
            # function call?
            if tok.kind == NAME and self.peek(1).kind == PUNCT and self.peek(1).text == "(":
                return self.parse_func_call()
            return self.parse_column_ref()

        raise self.error("expected expression")

    def parse_case(self) -> n.Expr:
        self.expect_kw("CASE")
        operand = None
        if not self.at_kw("WHEN"):
            operand = self.parse_expr()
        whens: list[tuple[n.Expr, n.Expr]] = []
        while self.take_kw("WHEN"):
            cond = self.parse_expr()
            self.expect_kw("THEN")
            whens.append((cond, self.parse_expr()))
        if not whens:
            raise self.error("expected WHEN")
        else_ = None
        if self.take_kw("ELSE"):
            else_ = self.parse_expr()
        self.expect_kw("END")
        return n.CaseExpr(operand=operand, whens=whens, else_=else_)

    def parse_func_call(self) -> n.Expr:
        name = self.next().text
        self.expect_punct("(")
        call = n.FuncCall(name=name)
        if self.at_op("*"):
            self.next()
            call.star = True
        elif not self.at_punct(")"):
            call.distinct = self.take_kw("DISTINCT")
            call.args.append(self.parse_expr())
            while self.take_punct(","):
                call.args.append(self.parse_expr())
        self.expect_punct(")")
        if self.take_kw("FILTER"):
            self.expect_punct("(")
            self.expect_kw("WHERE")
            call.filter_where = self.parse_expr()
            self.expect_punct(")")
        if self.take_kw("OVER"):
            if self.at_punct("("):
                self.next()
                call.window = self.parse_window_spec()
                self.expect_punct(")")
            else:
                call.window = n.WindowSpec(name=self.parse_name("window name"))
        return call

    def parse_window_spec(self) -> n.WindowSpec:
        spec = n.WindowSpec()
        tok = self.peek()
        if tok.kind in (NAME, QNAME) and not self.at_kw(
            "PARTITION", "ORDER", "ROWS", "RANGE", "GROUPS"
        ):
            spec.name = self.parse_name("window name")
        if self.at_kw("PARTITION"):
            self.next()
            self.expect_kw("BY")
            spec.partition_by.append(self.parse_expr())
            while self.take_punct(","):
                spec.partition_by.append(self.parse_expr())
        if self.at_kw("ORDER"):
            self.next()
            self.expect_kw("BY")
            spec.order_by.append(self.parse_ordering_term())
            while self.take_punct(","):
                spec.order_by.append(self.parse_ordering_term())
        if self.at_kw("ROWS", "RANGE", "GROUPS"):
            # frame spec carried through as raw text
            start = self.peek().pos
            depth = 0
            parts: list[str] = []
            while True:
                tok = self.peek()
                if tok.kind == EOF:
                    break
                if tok.kind == PUNCT and tok.text == "(":
                    depth += 1
                if tok.kind == PUNCT and tok.text == ")":
                    if depth == 0:
                        break
                    depth -= 1
                parts.append(tok.text)
                self.next()
            spec.frame_raw = " ".join(parts)
            _ = start
        return spec

    def parse_column_ref(self) -> n.Expr:
        first = self.next().text
        if self.at_punct(".") and self.peek(1).kind in (NAME, QNAME):
            self.next()
            second = self.next().text
            if self.at_punct(".") and self.peek(1).kind in (NAME, QNAME):
                # schema.table.column: drop the schema part
                self.next()
                third = self.next().text
                return n.Column(table=second, name=third)
            return n.Column(table=first, name=second)
        return n.Column(table=None, name=first)

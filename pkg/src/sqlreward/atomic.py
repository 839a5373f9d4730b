"""Atomic-operation decomposition of SQL and set similarity.

A query is parsed to an AST and flattened into a set of clause-level
primitives (projections, join keys, predicates, group/order keys, ...)
with canonical rendering: identifiers case-folded, table aliases resolved
to base tables, literals normalized. Two queries that differ only in
formatting, keyword/identifier case, or alias naming decompose to equal
sets.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from typing import Iterable, Optional

from .sqlast import nodes as n
from .sqlast.parser import ParseError, parse_sql

OP_KINDS = frozenset({
    "FROM", "JOIN", "ON_EQ", "ON_PRED",
    "SELECT_COL", "SELECT_AGG", "SELECT_EXPR", "DISTINCT",
    "WHERE_PRED", "HAVING_PRED", "VALUE",
    "GROUP_BY", "ORDER_BY", "LIMIT",
    "UNION", "INTERSECT", "EXCEPT", "WITH_CTE",
    "ENTER_SUBQUERY", "EXIT_SUBQUERY", "SUBQ_LAST",
    "WINDOW", "SELECT_WIN", "ALIAS",
})

SUBQUERY_ROLES = frozenset({
    "WHERE_SCALAR", "WHERE_IN", "WHERE_EXISTS",
    "FROM_DERIVED", "SELECT_SCALAR", "HAVING_SCALAR",
})

_AGG_FUNCS = {"count", "sum", "avg", "min", "max", "total", "group_concat"}

# keyword-style operators rendered upper-case inside expressions
_MIRROR = {">": "<", ">=": "<="}


@dataclass(frozen=True, order=True)
class AtomicOp:
    """One canonical structural primitive extracted from a SQL AST."""

    kind: str
    args: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in OP_KINDS:
            raise ValueError(f"unknown atomic op kind: {self.kind}")

    def render(self) -> str:
        if not self.args:
            return self.kind
        return f"{self.kind}({','.join(self.args)})"


@dataclass
class AtomicOpSet:
    """The flattened set of atomic operations of one SQL statement."""

    ops: frozenset[AtomicOp]
    source_sql: str
    parse_ok: bool
    error: Optional[str] = None

    def renderings(self) -> list[str]:
        return sorted(op.render() for op in self.ops)


def decompose(text: str) -> AtomicOpSet:
    """Decompose SQL text into its atomic-operation set.

    Never raises: a parse failure yields parse_ok=False and an empty set.
    """
    try:
        stmt = parse_sql(text)
    except ParseError as exc:
        return AtomicOpSet(ops=frozenset(), source_sql=text, parse_ok=False,
                           error=str(exc))
    sink: list[AtomicOp] = []
    _walk_stmt(stmt, None, sink)
    return AtomicOpSet(ops=frozenset(sink), source_sql=text, parse_ok=True)


def jaccard(a: AtomicOpSet, b: AtomicOpSet) -> float:
    """|a ∩ b| / |a ∪ b|; 0.0 when the union is empty."""
    union = a.ops | b.ops
    if not union:
        return 0.0
    return len(a.ops & b.ops) / len(union)


# ---------------------------------------------------------------------------
# Canonical renderings


def canonical_number(text: str) -> str:
    """Render a numeric literal without trailing zeros or exponent."""
    try:
        d = Decimal(text)
    except InvalidOperation:
        return text.lower()  # hex literals and such
    s = format(d, "f")
    if "." in s:
        s = s.rstrip("0").rstrip(".")
    if s in ("-0", ""):
        s = "0"
    return s


def canonical_string(text: str) -> str:
    """Single-quoted form with internal quotes doubled; content verbatim."""
    return "'" + text.replace("'", "''") + "'"


def _literal_text(lit: n.Literal) -> str:
    if lit.kind == "number":
        return canonical_number(lit.text)
    if lit.kind == "string":
        return canonical_string(lit.text)
    if lit.kind == "null":
        return "NULL"
    if lit.kind == "bool":
        return lit.text.upper()
    if lit.kind == "blob":
        return f"X'{lit.text.upper()}'"
    return lit.text  # params verbatim


def _value(lit: n.Literal) -> str:
    return f"VALUE({_literal_text(lit)})"


# ---------------------------------------------------------------------------
# Scopes: alias -> base table resolution


class _Scope:
    def __init__(self, parent: Optional["_Scope"] = None):
        self.parent = parent
        self.alias_map: dict[str, Optional[str]] = {}  # lowered key -> base name
        self.tables: list[Optional[str]] = []          # None for derived tables
        self.select_aliases: set[str] = set()

    def add_table(self, key: Optional[str], base: Optional[str]) -> None:
        if key:
            self.alias_map[key.lower()] = base
        self.tables.append(base)

    def resolve_prefix(self, prefix: str) -> Optional[str] | str:
        key = prefix.lower()
        scope: Optional[_Scope] = self
        while scope is not None:
            if key in scope.alias_map:
                return scope.alias_map[key]
            scope = scope.parent
        return key  # unknown qualifier: keep as written (case-folded)

    def sole_table(self) -> Optional[str]:
        scope: Optional[_Scope] = self
        while scope is not None:
            if scope.tables:
                bases = [t for t in scope.tables]
                if len(bases) == 1 and bases[0] is not None:
                    return bases[0]
                return None
            scope = scope.parent
        return None

    def is_select_alias(self, name: str) -> bool:
        return name.lower() in self.select_aliases


def _resolve_column(col: n.Column, scope: _Scope, allow_alias: bool = False) -> str:
    name = col.name.lower()
    if col.table:
        base = scope.resolve_prefix(col.table)
        return f"{base}.{name}" if base else name
    if allow_alias and scope.is_select_alias(name):
        return name
    sole = scope.sole_table()
    return f"{sole}.{name}" if sole else name


# ---------------------------------------------------------------------------
# Expression rendering (canonical text, single spaces, upper-cased keywords)


def _render(expr: n.Expr, scope: _Scope, allow_alias: bool = False) -> str:
    r = lambda e: _render(e, scope, allow_alias)  # noqa: E731

    def wrap(e: n.Expr) -> str:
        # parenthesize compound operands so renders are structure-determined
        if isinstance(e, (n.Binary, n.CaseExpr, n.Between, n.InList, n.InSelect,
                          n.Like, n.IsExpr)):
            return f"({r(e)})"
        return r(e)

    if isinstance(expr, n.Literal):
        return _literal_text(expr)
    if isinstance(expr, n.Column):
        if expr.table:
            base = scope.resolve_prefix(expr.table)
            return f"{base}.{expr.name.lower()}" if base else expr.name.lower()
        return expr.name.lower()
    if isinstance(expr, n.Star):
        return f"{expr.table.lower()}.*" if expr.table else "*"
    if isinstance(expr, n.Unary):
        if expr.op == "NOT":
            return f"NOT {wrap(expr.operand)}"
        return f"{expr.op}{wrap(expr.operand)}"
    if isinstance(expr, n.Binary):
        op = expr.op.upper()
        if op == "==":
            op = "="
        elif op == "<>":
            op = "!="
        return f"{wrap(expr.left)} {op} {wrap(expr.right)}"
    if isinstance(expr, n.FuncCall):
        return _render_func(expr, scope, allow_alias)
    if isinstance(expr, n.Between):
        kw = "NOT BETWEEN" if expr.negated else "BETWEEN"
        return f"{wrap(expr.expr)} {kw} {wrap(expr.low)} AND {wrap(expr.high)}"
    if isinstance(expr, n.InList):
        kw = "NOT IN" if expr.negated else "IN"
        items = sorted(r(it) for it in expr.items)
        return f"{wrap(expr.expr)} {kw} ({','.join(items)})"
    if isinstance(expr, n.InSelect):
        kw = "NOT IN" if expr.negated else "IN"
        return f"{wrap(expr.expr)} {kw} ({_render_select(expr.select, scope)})"
    if isinstance(expr, n.InTable):
        kw = "NOT IN" if expr.negated else "IN"
        return f"{wrap(expr.expr)} {kw} {expr.table.lower()}"
    if isinstance(expr, n.Like):
        kw = f"NOT {expr.op}" if expr.negated else expr.op
        s = f"{wrap(expr.left)} {kw} {wrap(expr.right)}"
        if expr.escape is not None:
            s += f" ESCAPE {wrap(expr.escape)}"
        return s
    if isinstance(expr, n.IsExpr):
        kw = "IS NOT" if expr.negated else "IS"
        return f"{wrap(expr.left)} {kw} {wrap(expr.right)}"
    if isinstance(expr, n.ExistsExpr):
        kw = "NOT EXISTS" if expr.negated else "EXISTS"
        return f"{kw} ({_render_select(expr.select, scope)})"
    if isinstance(expr, n.CaseExpr):
        parts = ["CASE"]
        if expr.operand is not None:
            parts.append(r(expr.operand))
        for cond, res in expr.whens:
            parts.append(f"WHEN {r(cond)} THEN {r(res)}")
        if expr.else_ is not None:
            parts.append(f"ELSE {r(expr.else_)}")
        parts.append("END")
        return " ".join(parts)
    if isinstance(expr, n.CastExpr):
        return f"CAST({r(expr.expr)} AS {expr.type_name.upper()})"
    if isinstance(expr, n.Collate):
        return r(expr.expr)
    if isinstance(expr, n.ScalarSubquery):
        return f"({_render_select(expr.select, scope)})"
    if isinstance(expr, n.Raw):
        return expr.text
    return repr(expr)


def _render_func(call: n.FuncCall, scope: _Scope, allow_alias: bool) -> str:
    name = call.name.upper()
    if call.star:
        inner = "*"
    else:
        rendered = [_render(a, scope, allow_alias) for a in call.args]
        inner = ",".join(rendered)
        if call.distinct:
            inner = f"DISTINCT {inner}"
    return f"{name}({inner})"


def _render_select(stmt: n.SelectStmt, scope: _Scope) -> str:
    """Compact canonical rendering of a nested select, for raw-op args."""
    parts: list[str] = []
    for i, core in enumerate(stmt.cores):
        if i > 0:
            parts.append(stmt.compound_ops[i - 1])
        if isinstance(core, n.ValuesCore):
            rows = ",".join(
                "(" + ",".join(_render(e, scope) for e in row) + ")"
                for row in core.rows
            )
            parts.append(f"VALUES {rows}")
            continue
        seg = ["SELECT"]
        if core.distinct:
            seg.append("DISTINCT")
        cols = []
        for proj in core.projections:
            if isinstance(proj, n.Star):
                cols.append(_render(proj, scope))
            else:
                text = _render(proj.expr, scope)
                if proj.alias:
                    text += f" AS {proj.alias.lower()}"
                cols.append(text)
        seg.append(",".join(cols))
        if core.from_item is not None:
            seg.append("FROM " + _render_from(core.from_item, scope))
        if core.where is not None:
            seg.append("WHERE " + _render(core.where, scope))
        if core.group_by:
            seg.append("GROUP BY " + ",".join(_render(g, scope) for g in core.group_by))
        if core.having is not None:
            seg.append("HAVING " + _render(core.having, scope))
        parts.append(" ".join(seg))
    if stmt.order_by:
        terms = ",".join(
            _render(t.expr, scope) + (" DESC" if t.direction == "DESC" else "")
            for t in stmt.order_by
        )
        parts.append(f"ORDER BY {terms}")
    if stmt.limit is not None:
        parts.append("LIMIT " + _render(stmt.limit, scope))
    return " ".join(parts)


def _render_from(item: n.FromItem, scope: _Scope) -> str:
    if isinstance(item, n.TableRef):
        return item.name.lower()
    if isinstance(item, n.DerivedTable):
        return f"({_render_select(item.select, scope)})"
    left = _render_from(item.left, scope)
    right = _render_from(item.right, scope)
    s = f"{left} {item.join_type} JOIN {right}"
    if item.on is not None:
        s += " ON " + _render(item.on, scope)
    elif item.using:
        s += " USING (" + ",".join(c.lower() for c in item.using) + ")"
    return s


# ---------------------------------------------------------------------------
# Decomposition walk


def _walk_stmt(stmt: n.SelectStmt, parent: Optional[_Scope], sink: list[AtomicOp]) -> None:
    for cte in stmt.ctes:
        sink.append(AtomicOp("WITH_CTE", (cte.name.lower(),)))
        _walk_stmt(cte.select, parent, sink)

    first_scope: Optional[_Scope] = None
    for i, core in enumerate(stmt.cores):
        if i > 0:
            op = stmt.compound_ops[i - 1]
            if op == "UNION ALL":
                sink.append(AtomicOp("UNION", ("ALL",)))
            else:
                sink.append(AtomicOp(op))
        scope = _walk_core(core, parent, sink)
        if first_scope is None:
            first_scope = scope

    scope = first_scope or _Scope(parent)
    for term in stmt.order_by:
        rendering = _order_key(term.expr, scope, sink)
        sink.append(AtomicOp("ORDER_BY", (rendering, term.direction)))

    if stmt.limit is not None:
        args = [_operand(stmt.limit, "WHERE", scope, sink, bare_literal=True)]
        if stmt.offset is not None:
            args.append(_operand(stmt.offset, "WHERE", scope, sink, bare_literal=True))
        sink.append(AtomicOp("LIMIT", tuple(args)))


def _walk_core(core: n.SelectCore | n.ValuesCore, parent: Optional[_Scope],
               sink: list[AtomicOp]) -> _Scope:
    scope = _Scope(parent)
    if isinstance(core, n.ValuesCore):
        for row in core.rows:
            for e in row:
                sink.append(AtomicOp("SELECT_EXPR", (_operand(e, "WHERE", scope, sink),)))
        return scope

    if core.from_item is not None:
        _walk_from(core.from_item, scope, sink, is_first=[True])

    for proj in core.projections:
        if isinstance(proj, n.Star):
            if proj.table:
                base = scope.resolve_prefix(proj.table)
                sink.append(AtomicOp("SELECT_COL", (f"{base}.*" if base else "*",)))
            else:
                sink.append(AtomicOp("SELECT_COL", ("*",)))
            continue
        if proj.alias:
            scope.select_aliases.add(proj.alias.lower())
        _emit_projection(proj, scope, sink)

    if core.distinct:
        sink.append(AtomicOp("DISTINCT"))

    if core.where is not None:
        for conj in _split_and(core.where):
            _emit_predicate(conj, "WHERE", scope, sink)
    for key in core.group_by:
        if isinstance(key, n.Column):
            sink.append(AtomicOp("GROUP_BY", (_resolve_column(key, scope, allow_alias=True),)))
        else:
            sink.append(AtomicOp("GROUP_BY", (_render(key, scope, allow_alias=True),)))
    if core.having is not None:
        for conj in _split_and(core.having):
            _emit_predicate(conj, "HAVING", scope, sink)
    return scope


def _walk_from(item: n.FromItem, scope: _Scope, sink: list[AtomicOp],
               is_first: list[bool], join_type: str = "INNER") -> None:
    if isinstance(item, n.TableRef):
        base = item.name.lower()
        scope.add_table(item.alias or item.name, base)
        if is_first[0]:
            sink.append(AtomicOp("FROM", (base,)))
            is_first[0] = False
        else:
            sink.append(AtomicOp("JOIN", (base, join_type)))
        return
    if isinstance(item, n.DerivedTable):
        sink.append(AtomicOp("ENTER_SUBQUERY", ("FROM_DERIVED",)))
        _walk_stmt(item.select, scope, sink)
        sink.append(AtomicOp("EXIT_SUBQUERY"))
        scope.add_table(item.alias, None)
        is_first[0] = False
        return
    # JoinClause
    _walk_from(item.left, scope, sink, is_first, join_type)
    _walk_from(item.right, scope, sink, is_first, item.join_type)
    if item.on is not None:
        for conj in _split_and(item.on):
            _emit_predicate(conj, "ON", scope, sink)
    elif item.using:
        names = _join_operand_names(item)
        for col in item.using:
            c = col.lower()
            lhs = f"{names[0]}.{c}" if names[0] else c
            rhs = f"{names[1]}.{c}" if names[1] else c
            a, b = sorted((lhs, rhs))
            sink.append(AtomicOp("ON_EQ", (a, b)))


def _join_operand_names(join: n.JoinClause) -> tuple[Optional[str], Optional[str]]:
    def name_of(item: n.FromItem) -> Optional[str]:
        if isinstance(item, n.TableRef):
            return item.name.lower()
        return None  # joins and derived tables: not attributable without schema

    return name_of(join.left), name_of(join.right)


def _split_and(expr: n.Expr) -> list[n.Expr]:
    if isinstance(expr, n.Binary) and expr.op.upper() == "AND":
        return _split_and(expr.left) + _split_and(expr.right)
    return [expr]


def _emit_projection(proj: n.ExprCol, scope: _Scope, sink: list[AtomicOp]) -> None:
    expr = proj.expr
    if isinstance(expr, n.Column):
        sink.append(AtomicOp("SELECT_COL", (_resolve_column(expr, scope),)))
    elif isinstance(expr, n.FuncCall) and expr.window is not None:
        args = tuple(_render(a, scope) for a in expr.args) if not expr.star else ("*",)
        sink.append(AtomicOp("SELECT_WIN", (expr.name.upper(),) + args))
        sink.append(_window_op(expr.window, scope))
    elif _is_aggregate(expr):
        sink.append(AtomicOp("SELECT_AGG", _agg_args(expr, scope)))
    elif isinstance(expr, n.ScalarSubquery):
        sink.append(AtomicOp("ENTER_SUBQUERY", ("SELECT_SCALAR",)))
        _walk_stmt(expr.select, scope, sink)
        sink.append(AtomicOp("EXIT_SUBQUERY"))
        sink.append(AtomicOp("SELECT_EXPR", ("SUBQ_LAST",)))
    elif isinstance(expr, n.Literal):
        sink.append(AtomicOp("SELECT_EXPR", (_value(expr),)))
    else:
        sink.append(AtomicOp("SELECT_EXPR", (_render(expr, scope),)))
    if proj.alias:
        sink.append(AtomicOp("ALIAS", ("COLUMN", _render(expr, scope), proj.alias.lower())))


def _is_aggregate(expr: n.Expr) -> bool:
    if not isinstance(expr, n.FuncCall) or expr.window is not None:
        return False
    name = expr.name.lower()
    if name not in _AGG_FUNCS:
        return False
    if name in ("min", "max") and len(expr.args) > 1:
        return False  # scalar min/max over multiple args
    return True


def _agg_args(call: n.FuncCall, scope: _Scope) -> tuple[str, ...]:
    name = call.name.upper()
    if call.star:
        operand = "*"
    else:
        parts = []
        for a in call.args:
            if isinstance(a, n.Column):
                parts.append(_resolve_column(a, scope))
            else:
                parts.append(_render(a, scope))
        operand = ",".join(parts)
        if call.distinct:
            operand = f"DISTINCT {operand}"
    return (name, operand)


def _window_op(spec: n.WindowSpec, scope: _Scope) -> AtomicOp:
    part = ",".join(_render(e, scope) for e in spec.partition_by) or "NONE"
    order = ",".join(
        f"{_render(t.expr, scope, allow_alias=True)} {t.direction}" for t in spec.order_by
    ) or "NONE"
    frame = spec.frame_raw.upper() if spec.frame_raw else "NONE"
    return AtomicOp("WINDOW", (part, order, frame))


def _order_key(expr: n.Expr, scope: _Scope, sink: list[AtomicOp]) -> str:
    if isinstance(expr, n.Column):
        return _resolve_column(expr, scope, allow_alias=True)
    if isinstance(expr, n.Literal):
        return _literal_text(expr)
    if _is_aggregate(expr):
        name, operand = _agg_args(expr, scope)
        return f"{name}({operand})"
    return _render(expr, scope, allow_alias=True)


_SUBQ_ROLE = {
    ("WHERE", "scalar"): "WHERE_SCALAR",
    ("WHERE", "in"): "WHERE_IN",
    ("WHERE", "exists"): "WHERE_EXISTS",
    ("HAVING", "scalar"): "HAVING_SCALAR",
    ("HAVING", "in"): "HAVING_SCALAR",
    ("HAVING", "exists"): "HAVING_SCALAR",
    ("ON", "scalar"): "WHERE_SCALAR",
    ("ON", "in"): "WHERE_IN",
    ("ON", "exists"): "WHERE_EXISTS",
}


def _emit_subquery(select: n.SelectStmt, ctx: str, flavor: str, scope: _Scope,
                   sink: list[AtomicOp]) -> str:
    role = _SUBQ_ROLE[(ctx, flavor)]
    sink.append(AtomicOp("ENTER_SUBQUERY", (role,)))
    _walk_stmt(select, scope, sink)
    sink.append(AtomicOp("EXIT_SUBQUERY"))
    return "SUBQ_LAST"


def _operand(expr: n.Expr, ctx: str, scope: _Scope, sink: list[AtomicOp],
             bare_literal: bool = False) -> str:
    """Render one predicate operand, emitting subquery ops as a side effect."""
    if isinstance(expr, n.Literal):
        return _literal_text(expr) if bare_literal else _value(expr)
    if isinstance(expr, n.Column):
        allow = ctx in ("HAVING", "ORDER")
        return _resolve_column(expr, scope, allow_alias=allow)
    if isinstance(expr, n.ScalarSubquery):
        return _emit_subquery(expr.select, ctx, "scalar", scope, sink)
    if _is_aggregate(expr):
        name, operand = _agg_args(expr, scope)
        return f"{name}({operand})"
    return _render(expr, scope, allow_alias=ctx == "HAVING")


def _is_literal_operand(expr: n.Expr) -> bool:
    return isinstance(expr, n.Literal) or (
        isinstance(expr, n.Unary) and expr.op in "+-" and isinstance(expr.operand, n.Literal)
    )


def _pred_kind(ctx: str) -> str:
    return {"WHERE": "WHERE_PRED", "HAVING": "HAVING_PRED", "ON": "ON_PRED"}[ctx]


def _emit_predicate(expr: n.Expr, ctx: str, scope: _Scope, sink: list[AtomicOp]) -> None:
    kind = _pred_kind(ctx)

    if isinstance(expr, n.Binary) and expr.op in ("=", "==", "!=", "<>", "<", "<=", ">", ">="):
        op = {"==": "=", "<>": "!="}.get(expr.op, expr.op)
        left, right = expr.left, expr.right
        if op in _MIRROR:  # a > b  ≡  b < a
            op = _MIRROR[op]
            left, right = right, left
        if ctx == "ON" and op == "=" and isinstance(left, n.Column) and isinstance(right, n.Column):
            a = _resolve_column(left, scope)
            b = _resolve_column(right, scope)
            lo, hi = sorted((a, b))
            sink.append(AtomicOp("ON_EQ", (lo, hi)))
            return
        lhs = _operand(left, ctx, scope, sink)
        rhs = _operand(right, ctx, scope, sink)
        if op in ("=", "!="):
            # canonical arg order for the symmetric comparisons
            lit_l, lit_r = _is_literal_operand(left), _is_literal_operand(right)
            if lit_l and not lit_r:
                lhs, rhs = rhs, lhs
            elif lit_l == lit_r and rhs < lhs:
                lhs, rhs = rhs, lhs
        sink.append(AtomicOp(kind, (op, lhs, rhs)))
        return

    if isinstance(expr, n.IsExpr):
        op = "IS NOT" if expr.negated else "IS"
        lhs = _operand(expr.left, ctx, scope, sink)
        rhs = _operand(expr.right, ctx, scope, sink)
        sink.append(AtomicOp(kind, (op, lhs, rhs)))
        return

    if isinstance(expr, n.Between):
        op = "NOT BETWEEN" if expr.negated else "BETWEEN"
        sink.append(AtomicOp(kind, (
            op,
            _operand(expr.expr, ctx, scope, sink),
            _operand(expr.low, ctx, scope, sink),
            _operand(expr.high, ctx, scope, sink),
        )))
        return

    if isinstance(expr, n.InList):
        op = "NOT IN" if expr.negated else "IN"
        lhs = _operand(expr.expr, ctx, scope, sink)
        items = sorted(_operand(it, ctx, scope, sink) for it in expr.items)
        sink.append(AtomicOp(kind, (op, lhs) + tuple(items)))
        return

    if isinstance(expr, n.InSelect):
        op = "NOT IN" if expr.negated else "IN"
        lhs = _operand(expr.expr, ctx, scope, sink)
        ref = _emit_subquery(expr.select, ctx, "in", scope, sink)
        sink.append(AtomicOp(kind, (op, lhs, ref)))
        return

    if isinstance(expr, n.InTable):
        op = "NOT IN" if expr.negated else "IN"
        lhs = _operand(expr.expr, ctx, scope, sink)
        sink.append(AtomicOp(kind, (op, lhs, expr.table.lower())))
        return

    if isinstance(expr, n.ExistsExpr):
        op = "NOT EXISTS" if expr.negated else "EXISTS"
        ref = _emit_subquery(expr.select, ctx, "exists", scope, sink)
        sink.append(AtomicOp(kind, (op, ref)))
        return

    if isinstance(expr, n.Like):
        op = f"NOT {expr.op}" if expr.negated else expr.op
        args = [op,
                _operand(expr.left, ctx, scope, sink),
                _operand(expr.right, ctx, scope, sink)]
        if expr.escape is not None:
            args.append(_operand(expr.escape, ctx, scope, sink))
        sink.append(AtomicOp(kind, tuple(args)))
        return

    if isinstance(expr, n.Binary) and expr.op.upper() == "OR":
        sink.append(AtomicOp(kind, ("OR", _render(expr, scope, allow_alias=ctx == "HAVING"))))
        return

    if isinstance(expr, n.Unary) and expr.op == "NOT":
        sink.append(AtomicOp(kind, ("NOT", _render(expr.operand, scope,
                                                   allow_alias=ctx == "HAVING"))))
        return

    # anything else (bare boolean column, arithmetic truthiness, raw nodes)
    sink.append(AtomicOp(kind, ("EXPR", _render(expr, scope, allow_alias=ctx == "HAVING"))))

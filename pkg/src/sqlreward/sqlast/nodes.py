"""AST node types for parsed SELECT statements."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

# ---------------------------------------------------------------------------
# Expressions


@dataclass
class Literal:
    kind: str  # "number" | "string" | "null" | "blob" | "bool" | "param"
    text: str  # raw source text (unquoted for strings)


@dataclass
class Column:
    table: Optional[str]  # qualifier as written (alias or table name)
    name: str


@dataclass
class Star:
    table: Optional[str] = None


@dataclass
class Unary:
    op: str  # "-" | "+" | "~" | "NOT"
    operand: "Expr"


@dataclass
class Binary:
    op: str  # comparison, arithmetic, "AND", "OR", "||", ...
    left: "Expr"
    right: "Expr"


@dataclass
class FuncCall:
    name: str
    args: list["Expr"] = field(default_factory=list)
    distinct: bool = False
    star: bool = False
    window: Optional["WindowSpec"] = None
    filter_where: Optional["Expr"] = None


@dataclass
class WindowSpec:
    name: Optional[str] = None  # base window name or OVER name reference
    partition_by: list["Expr"] = field(default_factory=list)
    order_by: list["OrderingTerm"] = field(default_factory=list)
    frame_raw: Optional[str] = None  # raw token text of the frame spec


@dataclass
class Between:
    expr: "Expr"
    low: "Expr"
    high: "Expr"
    negated: bool = False


@dataclass
class InList:
    expr: "Expr"
    items: list["Expr"] = field(default_factory=list)
    negated: bool = False


@dataclass
class InSelect:
    expr: "Expr"
    select: "SelectStmt" = None  # type: ignore[assignment]
    negated: bool = False


@dataclass
class InTable:
    expr: "Expr"
    table: str = ""
    negated: bool = False


@dataclass
class Like:
    op: str  # "LIKE" | "GLOB" | "REGEXP" | "MATCH"
    left: "Expr"
    right: "Expr"
    escape: Optional["Expr"] = None
    negated: bool = False


@dataclass
class IsExpr:
    left: "Expr"
    right: "Expr"
    negated: bool = False


@dataclass
class ExistsExpr:
    select: "SelectStmt"
    negated: bool = False


@dataclass
class CaseExpr:
    operand: Optional["Expr"]
    whens: list[tuple["Expr", "Expr"]] = field(default_factory=list)
    else_: Optional["Expr"] = None


@dataclass
class CastExpr:
    expr: "Expr"
    type_name: str = ""


@dataclass
class Collate:
    expr: "Expr"
    collation: str = ""


@dataclass
class ScalarSubquery:
    select: "SelectStmt"


@dataclass
class Raw:
    """Fallback for constructs carried through as raw text."""

    text: str


Expr = Union[
    Literal,
    Column,
    Star,
    Unary,
    Binary,
    FuncCall,
    Between,
    InList,
    InSelect,
    InTable,
    Like,
    IsExpr,
    ExistsExpr,
    CaseExpr,
    CastExpr,
    Collate,
    ScalarSubquery,
    Raw,
]

# ---------------------------------------------------------------------------
# Clauses and statements


@dataclass
class OrderingTerm:
    expr: Expr
    direction: str = "ASC"  # "ASC" | "DESC"
    collate: Optional[str] = None
    nulls: Optional[str] = None  # "FIRST" | "LAST"


@dataclass
class ExprCol:
    expr: Expr
    alias: Optional[str] = None


ResultCol = Union[Star, ExprCol]


@dataclass
class TableRef:
    name: str
    alias: Optional[str] = None


@dataclass
class DerivedTable:
    select: "SelectStmt"
    alias: Optional[str] = None


@dataclass
class JoinClause:
    left: "FromItem"
    right: "FromItem"
    join_type: str = "INNER"  # "INNER" | "LEFT" | "RIGHT" | "FULL" | "CROSS"
    natural: bool = False
    on: Optional[Expr] = None
    using: list[str] = field(default_factory=list)


FromItem = Union[TableRef, DerivedTable, JoinClause]


@dataclass
class SelectCore:
    distinct: bool = False
    projections: list[ResultCol] = field(default_factory=list)
    from_item: Optional[FromItem] = None
    where: Optional[Expr] = None
    group_by: list[Expr] = field(default_factory=list)
    having: Optional[Expr] = None
    windows: dict[str, WindowSpec] = field(default_factory=dict)


@dataclass
class ValuesCore:
    rows: list[list[Expr]] = field(default_factory=list)


@dataclass
class CTE:
    name: str
    columns: list[str] = field(default_factory=list)
    select: "SelectStmt" = None  # type: ignore[assignment]


@dataclass
class SelectStmt:
    ctes: list[CTE] = field(default_factory=list)
    recursive: bool = False
    cores: list[Union[SelectCore, ValuesCore]] = field(default_factory=list)
    compound_ops: list[str] = field(default_factory=list)  # between consecutive cores
    order_by: list[OrderingTerm] = field(default_factory=list)
    limit: Optional[Expr] = None
    offset: Optional[Expr] = None


def count_select_cores(stmt: SelectStmt) -> int:
    """Count SELECT cores in a statement, including CTE bodies and subqueries."""
    total = 0

    def walk_stmt(s: SelectStmt) -> None:
        nonlocal total
        for cte in s.ctes:
            walk_stmt(cte.select)
        for core in s.cores:
            if isinstance(core, SelectCore):
                total += 1
                walk_core(core)
        for term in s.order_by:
            walk_expr(term.expr)

    def walk_core(core: SelectCore) -> None:
        for proj in core.projections:
            if isinstance(proj, ExprCol):
                walk_expr(proj.expr)
        if core.from_item is not None:
            walk_from(core.from_item)
        for e in (core.where, core.having):
            if e is not None:
                walk_expr(e)
        for g in core.group_by:
            walk_expr(g)

    def walk_from(item: FromItem) -> None:
        if isinstance(item, DerivedTable):
            walk_stmt(item.select)
        elif isinstance(item, JoinClause):
            walk_from(item.left)
            walk_from(item.right)
            if item.on is not None:
                walk_expr(item.on)

    def walk_expr(e: Expr) -> None:
        if isinstance(e, (ScalarSubquery,)):
            walk_stmt(e.select)
        elif isinstance(e, ExistsExpr):
            walk_stmt(e.select)
        elif isinstance(e, InSelect):
            walk_expr(e.expr)
            walk_stmt(e.select)
        elif isinstance(e, Unary):
            walk_expr(e.operand)
        elif isinstance(e, Binary):
            walk_expr(e.left)
            walk_expr(e.right)
        elif isinstance(e, FuncCall):
            for a in e.args:
                walk_expr(a)
        elif isinstance(e, Between):
            walk_expr(e.expr)
            walk_expr(e.low)
            walk_expr(e.high)
        elif isinstance(e, InList):
            walk_expr(e.expr)
            for it in e.items:
                walk_expr(it)
        elif isinstance(e, Like):
            walk_expr(e.left)
            walk_expr(e.right)
        elif isinstance(e, IsExpr):
            walk_expr(e.left)
            walk_expr(e.right)
        elif isinstance(e, CaseExpr):
            if e.operand is not None:
                walk_expr(e.operand)
            for cond, res in e.whens:
                walk_expr(cond)
                walk_expr(res)
            if e.else_ is not None:
                walk_expr(e.else_)
        elif isinstance(e, (CastExpr, Collate)):
            walk_expr(e.expr)

    walk_stmt(stmt)
    return total

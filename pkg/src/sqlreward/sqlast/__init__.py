"""SQLite-dialect SQL parsing: tokenizer, AST nodes, recursive-descent parser."""

from .nodes import (
    CTE,
    Between,
    Binary,
    CaseExpr,
    CastExpr,
    Collate,
    Column,
    DerivedTable,
    ExistsExpr,
    ExprCol,
    FuncCall,
    InList,
    InSelect,
    InTable,
    IsExpr,
    JoinClause,
    Like,
    Literal,
    OrderingTerm,
    Raw,
    ScalarSubquery,
    SelectCore,
    SelectStmt,
    Star,
    TableRef,
    Unary,
    ValuesCore,
    WindowSpec,
    count_select_cores,
)
from .parser import ParseError, parse_sql
from .tokens import Token, tokenize

__all__ = [
    "CTE",
    "Between",
    "Binary",
    "CaseExpr",
    "CastExpr",
    "Collate",
    "Column",
    "DerivedTable",
    "ExistsExpr",
    "ExprCol",
    "FuncCall",
    "InList",
    "InSelect",
    "InTable",
    "IsExpr",
    "JoinClause",
    "Like",
    "Literal",
    "OrderingTerm",
    "ParseError",
    "Raw",
    "ScalarSubquery",
    "SelectCore",
    "SelectStmt",
    "Star",
    "TableRef",
    "Token",
    "Unary",
    "ValuesCore",
    "WindowSpec",
    "count_select_cores",
    "parse_sql",
    "tokenize",
]

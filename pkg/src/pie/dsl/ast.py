"""Syntax tree of PIE programs.

Nodes are frozen dataclasses; the ``span`` field is excluded from equality so
two trees compare equal when they differ only in source positions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union


@dataclass(frozen=True)
class Span:
    start: int
    end: int

    def covers(self, other: "Span") -> bool:
        return self.start <= other.start and other.end <= self.end

    def overlaps(self, start: int, end: int) -> bool:
        return self.start < end and start < self.end or (self.start == self.end == start)


NO_SPAN = Span(0, 0)


def _span():
    return field(default=NO_SPAN, compare=False, repr=False)


# -- types -------------------------------------------------------------------

PRIMITIVES = ("unit", "bool", "int", "string", "path")


@dataclass(frozen=True)
class TPrim:
    name: str
    span: Span = _span()


@dataclass(frozen=True)
class TNamed:
    name: str
    span: Span = _span()


@dataclass(frozen=True)
class TOptional:
    inner: "TypeExpr"
    span: Span = _span()


@dataclass(frozen=True)
class TList:
    inner: "TypeExpr"
    span: Span = _span()


@dataclass(frozen=True)
class TTuple:
    elems: tuple["TypeExpr", ...]
    span: Span = _span()


TypeExpr = Union[TPrim, TNamed, TOptional, TList, TTuple]


# -- binders -------------------------------------------------------------------


@dataclass(frozen=True)
class Bind:
    name: str
    type: Optional[TypeExpr] = None
    span: Span = _span()


@dataclass(frozen=True)
class TupleBinder:
    binds: tuple[Bind, ...]
    span: Span = _span()


Binder = Union[Bind, TupleBinder]


# -- expressions ---------------------------------------------------------------


@dataclass(frozen=True)
class Block:
    stmts: tuple["Expr", ...]
    span: Span = _span()


@dataclass(frozen=True)
class Paren:
    expr: "Expr"
    span: Span = _span()


@dataclass(frozen=True)
class Not:
    expr: "Expr"
    span: Span = _span()


@dataclass(frozen=True)
class NonNull:
    expr: "Expr"
    span: Span = _span()


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    span: Span = _span()


@dataclass(frozen=True)
class If:
    cond: "Expr"
    then: "Expr"
    else_: Optional["Expr"] = None
    span: Span = _span()


@dataclass(frozen=True)
class Generator:
    binder: Binder
    source: "Expr"
    span: Span = _span()


@dataclass(frozen=True)
class Comprehension:
    body: "Expr"
    generators: tuple[Generator, ...]
    span: Span = _span()


@dataclass(frozen=True)
class Val:
    binder: Binder
    rhs: "Expr"
    span: Span = _span()


@dataclass(frozen=True)
class Ref:
    name: str
    span: Span = _span()


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["Expr", ...]
    span: Span = _span()


@dataclass(frozen=True)
class MethodCall:
    receiver: "Expr"
    name: str
    args: tuple["Expr", ...]
    span: Span = _span()


@dataclass(frozen=True)
class FilterExpr:
    kind: str  # regex | pattern | patterns | extension | extensions
    arg: "Expr"
    span: Span = _span()


@dataclass(frozen=True)
class Requires:
    path: "Expr"
    filter: Optional[FilterExpr] = None
    stamper: Optional[str] = None
    span: Span = _span()


@dataclass(frozen=True)
class Generates:
    path: "Expr"
    stamper: Optional[str] = None
    span: Span = _span()


@dataclass(frozen=True)
class Exists:
    path: "Expr"
    span: Span = _span()


@dataclass(frozen=True)
class Read:
    path: "Expr"
    span: Span = _span()


@dataclass(frozen=True)
class ListDir:
    path: "Expr"
    filter: Optional[FilterExpr] = None
    span: Span = _span()


@dataclass(frozen=True)
class Walk:
    path: "Expr"
    filter: Optional[FilterExpr] = None
    span: Span = _span()


@dataclass(frozen=True)
class Return:
    expr: "Expr"
    span: Span = _span()


@dataclass(frozen=True)
class Fail:
    expr: "Expr"
    span: Span = _span()


@dataclass(frozen=True)
class UnitLit:
    span: Span = _span()


@dataclass(frozen=True)
class BoolLit:
    value: bool
    span: Span = _span()


@dataclass(frozen=True)
class IntLit:
    value: int
    span: Span = _span()


@dataclass(frozen=True)
class NullLit:
    span: Span = _span()


@dataclass(frozen=True)
class TupleLit:
    elems: tuple["Expr", ...]
    span: Span = _span()


@dataclass(frozen=True)
class ListLit:
    elems: tuple["Expr", ...]
    span: Span = _span()


@dataclass(frozen=True)
class StrLit:
    """Text segments (str) interleaved with interpolated expressions."""

    parts: tuple[Union[str, "Expr"], ...]
    span: Span = _span()


@dataclass(frozen=True)
class PathLit:
    parts: tuple[Union[str, "Expr"], ...]
    relative: bool
    span: Span = _span()


Expr = Union[
    Block, Paren, Not, NonNull, Binary, If, Comprehension, Val, Ref, Call, MethodCall,
    Requires, Generates, Exists, Read, ListDir, Walk, Return, Fail, UnitLit, BoolLit,
    IntLit, NullLit, TupleLit, ListLit, StrLit, PathLit,
]


# -- definitions -----------------------------------------------------------------


@dataclass(frozen=True)
class Param:
    name: Optional[str]
    type: TypeExpr
    span: Span = _span()


@dataclass(frozen=True)
class FuncHead:
    name: str
    params: tuple[Param, ...]
    ret: TypeExpr
    span: Span = _span()


@dataclass(frozen=True)
class ForeignBody:
    """``foreign``, ``foreign id`` or ``foreign java qid#id``."""

    binding: Optional[str] = None
    java_class: Optional[str] = None
    span: Span = _span()


@dataclass(frozen=True)
class FuncDef:
    head: FuncHead
    body: Union[ForeignBody, Expr]
    span: Span = _span()

    @property
    def name(self) -> str:
        return self.head.name

    @property
    def params(self) -> tuple[Param, ...]:
        return self.head.params

    @property
    def ret(self) -> TypeExpr:
        return self.head.ret

    @property
    def is_foreign(self) -> bool:
        return isinstance(self.body, ForeignBody)

    @property
    def binding(self) -> str:
        if isinstance(self.body, ForeignBody) and self.body.binding:
            return self.body.binding
        return self.head.name


@dataclass(frozen=True)
class DataDef:
    name: str
    super: Optional[str]
    binding: Optional[str]
    java: bool
    methods: tuple[FuncHead, ...]
    span: Span = _span()

    @property
    def binding_name(self) -> str:
        return self.binding or self.name


@dataclass(frozen=True)
class Program:
    defs: tuple[Union[FuncDef, DataDef], ...]
    origin: str = field(default="<input>", compare=False)
    source: str = field(default="", compare=False, repr=False)

    def funcs(self) -> list[FuncDef]:
        return [d for d in self.defs if isinstance(d, FuncDef)]

    def datas(self) -> list[DataDef]:
        return [d for d in self.defs if isinstance(d, DataDef)]


def children(node) -> list:
    """Direct child nodes of any AST node (used by span and traversal checks)."""
    out = []
    for name in getattr(node, "__dataclass_fields__", {}):
        if name == "span":
            continue
        val = getattr(node, name)
        items = val if isinstance(val, tuple) else (val,)
        for item in items:
            if hasattr(item, "__dataclass_fields__") and not isinstance(item, Span):
                out.append(item)
    return out


def walk_nodes(node):
    yield node
    for child in children(node):
        yield from walk_nodes(child)

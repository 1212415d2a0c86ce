"""Name binding and type checking.

Inference is local and forward only: each expression is checked with an
optional expected type that flows into empty list literals, ``null`` and
branch bodies. Checking continues past errors; an ``ErrorT`` result silences
follow-up diagnostics about the same expression.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from pie.dsl import ast as A
from pie.dsl.diagnostics import Diagnostic, DiagnosticError
from pie.errors import UnknownFunction

# -- semantic types -------------------------------------------------------------


@dataclass(frozen=True)
class Prim:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class DataT:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class OptT:
    inner: "Type"

    def __str__(self):
        return f"{self.inner}?"


@dataclass(frozen=True)
class ListT:
    inner: "Type"

    def __str__(self):
        return f"{self.inner}*"


@dataclass(frozen=True)
class TupleT:
    elems: tuple["Type", ...]

    def __str__(self):
        return "(" + ", ".join(map(str, self.elems)) + ")"


@dataclass(frozen=True)
class NullT:
    def __str__(self):
        return "null"


@dataclass(frozen=True)
class BottomT:
    def __str__(self):
        return "nothing"


@dataclass(frozen=True)
class ErrorT:
    def __str__(self):
        return "<error>"


Type = Union[Prim, DataT, OptT, ListT, TupleT, NullT, BottomT, ErrorT]

UNIT_T, BOOL_T, INT_T, STR_T, PATH_T = (Prim(n) for n in A.PRIMITIVES)
NULL_T, BOTTOM_T, ERROR_T = NullT(), BottomT(), ErrorT()


def opt(t: Type) -> Type:
    if isinstance(t, (OptT, NullT, ErrorT, BottomT)):
        return t
    return OptT(t)


@dataclass
class DataInfo:
    name: str
    super: Optional[str]
    methods: dict[str, tuple[tuple[Type, ...], Type]]
    node: A.DataDef


@dataclass
class FuncSig:
    params: tuple[Type, ...]
    ret: Type
    node: A.FuncDef


@dataclass
class TypedProgram:
    program: A.Program
    types: dict[int, Type] = field(default_factory=dict)
    resolutions: dict[int, object] = field(default_factory=dict)
    plus_rules: dict[int, str] = field(default_factory=dict)
    data_table: dict[str, DataInfo] = field(default_factory=dict)
    funcs: dict[str, FuncSig] = field(default_factory=dict)

    def type_of(self, node) -> Type:
        return self.types[id(node)]

    def supers(self, name: str) -> list[str]:
        """``name`` followed by its declared supertype chain."""
        chain = []
        while name is not None and name in self.data_table and name not in chain:
            chain.append(name)
            name = self.data_table[name].super
        return chain

    def lookup_method(self, data: str, method: str):
        for name in self.supers(data):
            sig = self.data_table[name].methods.get(method)
            if sig is not None:
                return name, sig
        return None


PATH_METHODS: dict[str, tuple[tuple[Type, ...], Type]] = {"replaceExtension": ((STR_T,), PATH_T)}


class _Scope:
    def __init__(self, parent: Optional["_Scope"] = None):
        self.parent = parent
        self.names: dict[str, tuple[Type, object]] = {}

    def lookup(self, name: str):
        s = self
        while s is not None:
            if name in s.names:
                return s.names[name]
            s = s.parent
        return None


class Checker:
    def __init__(self, program: A.Program):
        self.prog = program
        self.tp = TypedProgram(program)
        self.diags: list[Diagnostic] = []
        self.ret: Type = UNIT_T
        self.params: set[str] = set()

    def error(self, span: A.Span, msg: str) -> None:
        self.diags.append(Diagnostic(self.prog.origin, span, msg))

    # -- declarations ----------------------------------------------------------

    def run(self) -> TypedProgram:
        seen: dict[str, A.Span] = {}
        for d in self.prog.defs:
            if d.name in seen:
                self.error(d.span, f"duplicate definition of '{d.name}'")
            else:
                seen[d.name] = d.span
        datas = [d for d in self.prog.defs if isinstance(d, A.DataDef)]
        for d in datas:
            if d.name not in self.tp.data_table:
                self.tp.data_table[d.name] = DataInfo(d.name, d.super, {}, d)
        for d in datas:
            if d.super is not None and d.super not in self.tp.data_table:
                self.error(d.span, f"unknown super type '{d.super}'")
            elif d.super is not None and d.name in self.tp.supers(d.super):
                self.error(d.span, f"cyclic super type chain through '{d.name}'")
                self.tp.data_table[d.name].super = None
            info = self.tp.data_table[d.name]
            if info.node is not d:
                continue
            for m in d.methods:
                if m.name in info.methods:
                    self.error(m.span, f"duplicate method '{m.name}' in '{d.name}'")
                    continue
                self.check_param_names(m)
                info.methods[m.name] = (tuple(self.resolve_type(p.type) for p in m.params),
                                        self.resolve_type(m.ret))
        for f in self.prog.funcs():
            sig = FuncSig(tuple(self.resolve_type(p.type) for p in f.params), self.resolve_type(f.ret), f)
            self.tp.funcs.setdefault(f.name, sig)
        for f in self.prog.funcs():
            self.check_param_names(f.head)
            if not f.is_foreign:
                self.check_body(f)
        return self.tp

    def check_param_names(self, head: A.FuncHead) -> None:
        names = set()
        for p in head.params:
            if p.name is None:
                continue
            if p.name in names:
                self.error(p.span, f"duplicate parameter '{p.name}'")
            names.add(p.name)

    def resolve_type(self, t: A.TypeExpr) -> Type:
        if isinstance(t, A.TPrim):
            return Prim(t.name)
        if isinstance(t, A.TNamed):
            if t.name not in self.tp.data_table:
                self.error(t.span, f"unknown type '{t.name}'")
                return ERROR_T
            return DataT(t.name)
        if isinstance(t, A.TOptional):
            return opt(self.resolve_type(t.inner))
        if isinstance(t, A.TList):
            return ListT(self.resolve_type(t.inner))
        return TupleT(tuple(self.resolve_type(e) for e in t.elems))

    def check_body(self, f: A.FuncDef) -> None:
        sig = self.tp.funcs[f.name]
        if sig.node is not f:
            return
        scope = _Scope()
        self.params = set()
        for p, t in zip(f.params, sig.params):
            if p.name is None:
                self.error(p.span, f"parameter of '{f.name}' needs a name")
                continue
            scope.names[p.name] = (t, p)
            self.params.add(p.name)
        self.ret = sig.ret
        body_t = self.expr(f.body, scope, sig.ret)
        if not self.assignable(body_t, sig.ret):
            self.error(f.body.span, f"body of '{f.name}' has type {body_t}, expected {sig.ret}")

    # -- relations -----------------------------------------------------------

    def assignable(self, src: Type, dst: Type) -> bool:
        if src == dst or isinstance(src, (ErrorT, BottomT)) or isinstance(dst, ErrorT):
            return True
        if isinstance(dst, OptT):
            if isinstance(src, NullT):
                return True
            if isinstance(src, OptT):
                return self.assignable(src.inner, dst.inner)
            return self.assignable(src, dst.inner)
        if isinstance(src, DataT) and isinstance(dst, DataT):
            return dst.name in self.tp.supers(src.name)
        if isinstance(src, ListT) and isinstance(dst, ListT):
            return self.assignable(src.inner, dst.inner)
        if isinstance(src, TupleT) and isinstance(dst, TupleT):
            return len(src.elems) == len(dst.elems) and all(
                self.assignable(a, b) for a, b in zip(src.elems, dst.elems))
        return False

    def unify(self, a: Type, b: Type) -> Optional[Type]:
        """Least common type of ``a`` and ``b``, or None."""
        if self.assignable(a, b) and not isinstance(b, ErrorT):
            return b if not isinstance(a, ErrorT) else a
        if self.assignable(b, a):
            return a
        if isinstance(a, NullT):
            return opt(b)
        if isinstance(b, NullT):
            return opt(a)
        if isinstance(a, OptT) or isinstance(b, OptT):
            inner = self.unify(a.inner if isinstance(a, OptT) else a, b.inner if isinstance(b, OptT) else b)
            return opt(inner) if inner is not None else None
        if isinstance(a, DataT) and isinstance(b, DataT):
            others = set(self.tp.supers(b.name))
            for s in self.tp.supers(a.name):
                if s in others:
                    return DataT(s)
            return None
        if isinstance(a, ListT) and isinstance(b, ListT):
            inner = self.unify(a.inner, b.inner)
            return ListT(inner) if inner is not None else None
        if isinstance(a, TupleT) and isinstance(b, TupleT) and len(a.elems) == len(b.elems):
            elems = [self.unify(x, y) for x, y in zip(a.elems, b.elems)]
            return None if None in elems else TupleT(tuple(elems))
        return None

    # -- expressions -----------------------------------------------------------

    def expr(self, e: A.Expr, scope: _Scope, expected: Optional[Type] = None) -> Type:
        t = self._expr(e, scope, expected)
        self.tp.types[id(e)] = t
        return t

    def expect(self, e: A.Expr, scope: _Scope, want: Type, what: str) -> Type:
        t = self.expr(e, scope, want)
        if not self.assignable(t, want):
            self.error(e.span, f"{what} has type {t}, expected {want}")
        return t

    def bind(self, scope: _Scope, b: A.Bind, t: Type) -> None:
        if b.name in self.params or b.name in scope.names:
            self.error(b.span, f"'{b.name}' is already defined in this scope")
        if b.type is not None:
            declared = self.resolve_type(b.type)
            if not self.assignable(t, declared):
                self.error(b.span, f"'{b.name}' is declared {declared} but bound to {t}")
            t = declared
        scope.names[b.name] = (t, b)

    def bind_binder(self, scope: _Scope, binder: A.Binder, t: Type, span: A.Span) -> None:
        if isinstance(binder, A.Bind):
            self.bind(scope, binder, t)
            return
        n = len(binder.binds)
        if isinstance(t, TupleT) and len(t.elems) == n:
            for b, et in zip(binder.binds, t.elems):
                self.bind(scope, b, et)
            return
        if not isinstance(t, ErrorT):
            self.error(span, f"cannot destructure {t} into {n} names")
        for b in binder.binds:
            self.bind(scope, b, ERROR_T)

    def binder_expectation(self, binder: A.Binder) -> Optional[Type]:
        if isinstance(binder, A.Bind):
            return self.resolve_type(binder.type) if binder.type is not None else None
        if all(b.type is not None for b in binder.binds):
            return TupleT(tuple(self.resolve_type(b.type) for b in binder.binds))
        return None

    def _expr(self, e: A.Expr, scope: _Scope, expected: Optional[Type]) -> Type:
        if isinstance(e, A.Block):
            inner = _Scope(scope)
            t: Type = UNIT_T
            for i, s in enumerate(e.stmts):
                last = i == len(e.stmts) - 1
                t = self.expr(s, inner, expected if last else None)
            return t if e.stmts else UNIT_T
        if isinstance(e, A.Paren):
            return self.expr(e.expr, scope, expected)
        if isinstance(e, A.Val):
            want = self.binder_expectation(e.binder)
            rhs = self.expr(e.rhs, scope, want)
            self.bind_binder(scope, e.binder, rhs, e.rhs.span)
            return UNIT_T
        if isinstance(e, A.Ref):
            found = scope.lookup(e.name)
            if found is None:
                self.error(e.span, f"unresolved reference '{e.name}'")
                return ERROR_T
            self.tp.resolutions[id(e)] = found[1]
            return found[0]
        if isinstance(e, A.Call):
            sig = self.tp.funcs.get(e.name)
            if sig is None:
                self.error(e.span, f"unresolved function '{e.name}'")
                for a in e.args:
                    self.expr(a, scope)
                return ERROR_T
            self.tp.resolutions[id(e)] = sig.node
            self.check_args(e, e.name, sig.params, scope)
            return sig.ret
        if isinstance(e, A.MethodCall):
            recv = self.expr(e.receiver, scope)
            sig = None
            if isinstance(recv, DataT):
                found = self.tp.lookup_method(recv.name, e.name)
                if found is not None:
                    owner, sig = found
                    self.tp.resolutions[id(e)] = (owner, e.name)
            elif recv == PATH_T and e.name in PATH_METHODS:
                sig = PATH_METHODS[e.name]
                self.tp.resolutions[id(e)] = ("path", e.name)
            elif isinstance(recv, ErrorT):
                for a in e.args:
                    self.expr(a, scope)
                return ERROR_T
            if sig is None:
                self.error(e.span, f"type {recv} has no method '{e.name}'")
                for a in e.args:
                    self.expr(a, scope)
                return ERROR_T
            self.check_args(e, e.name, sig[0], scope)
            return sig[1]
        if isinstance(e, A.If):
            self.expect(e.cond, scope, BOOL_T, "condition")
            then_scope, else_scope = _Scope(scope), _Scope(scope)
            self.narrow(e.cond, scope, then_scope, else_scope)
            if e.else_ is None:
                self.expr(e.then, then_scope)
                return UNIT_T
            a = self.expr(e.then, then_scope, expected)
            b = self.expr(e.else_, else_scope, expected)
            if expected is not None and self.assignable(a, expected) and self.assignable(b, expected):
                u = self.unify(a, b)
                return u if u is not None else expected
            u = self.unify(a, b)
            if u is None:
                self.error(e.span, f"branches have incompatible types {a} and {b}")
                return ERROR_T
            return u
        if isinstance(e, A.Comprehension):
            inner = scope
            for g in e.generators:
                src = self.expr(g.source, inner)
                inner = _Scope(inner)
                if isinstance(src, ListT):
                    self.bind_binder(inner, g.binder, src.inner, g.source.span)
                else:
                    if not isinstance(src, ErrorT):
                        self.error(g.source.span, f"comprehension source has type {src}, expected a list")
                    self.bind_binder(inner, g.binder, ERROR_T, g.source.span)
            want = expected.inner if isinstance(expected, ListT) else None
            body = self.expr(e.body, inner, want)
            return ListT(body)
        if isinstance(e, A.Binary):
            return self.binary(e, scope, expected)
        if isinstance(e, A.Not):
            self.expect(e.expr, scope, BOOL_T, "operand of '!'")
            return BOOL_T
        if isinstance(e, A.NonNull):
            t = self.expr(e.expr, scope, opt(expected) if expected is not None else None)
            if isinstance(t, OptT):
                return t.inner
            if isinstance(t, ErrorT):
                return t
            self.error(e.span, f"'!' needs an optional operand, found {t}")
            return ERROR_T
        if isinstance(e, A.Requires):
            t = self.expr(e.path, scope)
            if not (self.assignable(t, PATH_T) or self.assignable(t, ListT(PATH_T))):
                self.error(e.path.span, f"requires needs a path or list of paths, found {t}")
            self.filter(e.filter, scope)
            return UNIT_T
        if isinstance(e, A.Generates):
            self.expect(e.path, scope, PATH_T, "generated path")
            return UNIT_T
        if isinstance(e, A.Exists):
            self.expect(e.path, scope, PATH_T, "operand of exists")
            return BOOL_T
        if isinstance(e, A.Read):
            self.expect(e.path, scope, PATH_T, "operand of read")
            return STR_T
        if isinstance(e, (A.ListDir, A.Walk)):
            self.expect(e.path, scope, PATH_T, "directory")
            self.filter(e.filter, scope)
            return ListT(PATH_T)
        if isinstance(e, A.Return):
            self.expect(e.expr, scope, self.ret, "returned value")
            return BOTTOM_T
        if isinstance(e, A.Fail):
            self.expect(e.expr, scope, STR_T, "failure message")
            return BOTTOM_T
        if isinstance(e, A.UnitLit):
            return UNIT_T
        if isinstance(e, A.BoolLit):
            return BOOL_T
        if isinstance(e, A.IntLit):
            return INT_T
        if isinstance(e, A.NullLit):
            if expected is not None and isinstance(expected, OptT):
                return expected
            return NULL_T
        if isinstance(e, A.TupleLit):
            wants = expected.elems if isinstance(expected, TupleT) and len(expected.elems) == len(e.elems) \
                else (None,) * len(e.elems)
            return TupleT(tuple(self.expr(x, scope, w) for x, w in zip(e.elems, wants)))
        if isinstance(e, A.ListLit):
            want = expected.inner if isinstance(expected, ListT) else None
            if not e.elems:
                if want is None:
                    self.error(e.span, "cannot infer the element type of an empty list")
                    return ERROR_T
                return ListT(want)
            elem: Optional[Type] = None
            for x in e.elems:
                t = self.expr(x, scope, want)
                if elem is None:
                    elem = t
                    continue
                u = self.unify(elem, t)
                if u is None:
                    self.error(x.span, f"list element has type {t}, expected {elem}")
                else:
                    elem = u
            if want is not None and self.assignable(elem, want):
                elem = want
            return ListT(elem)
        if isinstance(e, (A.StrLit, A.PathLit)):
            for part in e.parts:
                if not isinstance(part, str):
                    self.expr(part, scope)
            return STR_T if isinstance(e, A.StrLit) else PATH_T
        raise TypeError(f"unknown expression {type(e).__name__}")

    def check_args(self, e, name: str, params: tuple[Type, ...], scope: _Scope) -> None:
        if len(e.args) != len(params):
            self.error(e.span, f"'{name}' takes {len(params)} argument(s) but {len(e.args)} given")
            for a in e.args:
                self.expr(a, scope)
            return
        for i, (a, p) in enumerate(zip(e.args, params)):
            self.expect(a, scope, p, f"argument {i + 1} of '{name}'")

    def filter(self, f: Optional[A.FilterExpr], scope: _Scope) -> None:
        if f is None:
            return
        want = ListT(STR_T) if f.kind.endswith("s") and f.kind != "regex" else STR_T
        self.expect(f.arg, scope, want, f"argument of '{f.kind}' filter")

    def narrow(self, cond: A.Expr, scope: _Scope, then_scope: _Scope, else_scope: _Scope) -> None:
        while isinstance(cond, A.Paren):
            cond = cond.expr
        if not isinstance(cond, A.Binary) or cond.op not in ("==", "!="):
            return
        l, r = cond.left, cond.right
        if isinstance(l, A.NullLit):
            l, r = r, l
        if not (isinstance(l, A.Ref) and isinstance(r, A.NullLit)):
            return
        found = scope.lookup(l.name)
        if found is None or not isinstance(found[0], OptT):
            return
        target = then_scope if cond.op == "!=" else else_scope
        target.names[l.name] = (found[0].inner, found[1])

    def binary(self, e: A.Binary, scope: _Scope, expected: Optional[Type]) -> Type:
        if e.op in ("&&", "||"):
            self.expect(e.left, scope, BOOL_T, f"left operand of '{e.op}'")
            self.expect(e.right, scope, BOOL_T, f"right operand of '{e.op}'")
            return BOOL_T
        if e.op in ("==", "!="):
            a = self.expr(e.left, scope)
            b = self.expr(e.right, scope, a if not isinstance(a, (NullT, ErrorT)) else None)
            if self.unify(a, b) is None:
                self.error(e.span, f"cannot compare {a} with {b}")
            return BOOL_T
        a = self.expr(e.left, scope, expected if isinstance(expected, ListT) else None)
        if isinstance(a, ListT):
            b = self.expr(e.right, scope, a)
            if isinstance(b, ListT) and self.assignable(b, a):
                rule = "concat"
            elif self.assignable(b, a.inner):
                rule = "append"
            elif isinstance(b, ListT) and self.unify(a, b) is not None:
                rule, a = "concat", self.unify(a, b)
            elif self.unify(a.inner, b) is not None:
                rule, a = "append", ListT(self.unify(a.inner, b))
            else:
                self.error(e.span, f"cannot add {b} to {a}")
                return ERROR_T
            self.tp.plus_rules[id(e)] = rule
            return a
        b = self.expr(e.right, scope)
        if isinstance(a, ErrorT) or isinstance(b, ErrorT):
            return ERROR_T
        for (x, y), (rule, out) in {(INT_T, INT_T): ("int", INT_T), (STR_T, STR_T): ("str", STR_T),
                                     (PATH_T, STR_T): ("path", PATH_T)}.items():
            if self.assignable(a, x) and self.assignable(b, y) and not isinstance(a, BottomT):
                self.tp.plus_rules[id(e)] = rule
                return out
        self.error(e.span, f"operator '+' does not apply to {a} and {b}")
        return ERROR_T


def check(program: A.Program) -> TypedProgram:
    """Type check ``program``; raises DiagnosticError if anything is wrong."""
    c = Checker(program)
    tp = c.run()
    if c.diags:
        raise DiagnosticError(c.diags, program.source)
    return tp


def entry_signature(tp: TypedProgram, func: str) -> tuple[list[Type], Type]:
    sig = tp.funcs.get(func)
    if sig is None:
        raise UnknownFunction(func)
    return list(sig.params), sig.ret


def type_from_expr(tp: TypedProgram, t: A.TypeExpr) -> Type:
    if isinstance(t, A.TPrim):
        return Prim(t.name)
    if isinstance(t, A.TNamed):
        return DataT(t.name)
    if isinstance(t, A.TOptional):
        return opt(type_from_expr(tp, t.inner))
    if isinstance(t, A.TList):
        return ListT(type_from_expr(tp, t.inner))
    return TupleT(tuple(type_from_expr(tp, e) for e in t.elems))

"""Recursive-descent parser producing :mod:`pie.dsl.ast` trees.

Expression precedence, loosest first:

    val / if  <  requires generates exists read list walk return fail
              <  ||  <  &&  <  == !=  <  +  <  prefix !  <  postfix ! . call

Operands of the keyword forms are parsed at ``||`` level, so ``read a + b``
reads ``a + b``. Keyword forms and ``val``/``if`` only appear where an
expression is delimited (block statements, arguments, list elements, branch
bodies, right-hand sides); elsewhere they need parentheses.
"""

from __future__ import annotations

import sys
from typing import Callable, Union

from pie.dsl import ast as A
from pie.dsl.ast import Span
from pie.dsl.diagnostics import Diagnostic, DiagnosticError
from pie.dsl.lexer import Interp, Token, tokenize
from pie.values import INT_MAX, INT_MIN

STAMPERS = ("exists", "modified", "hash")
FILTER_KINDS = ("regex", "pattern", "patterns", "extension", "extensions")
KEYWORD_FORMS = ("requires", "generates", "exists", "read", "list", "walk", "return", "fail")


class _Fail(Exception):
    pass


class Parser:
    def __init__(self, tokens: list[Token], source: str, origin: str, diags: list[Diagnostic]):
        self.toks = tokens
        self.i = 0
        self.src = source
        self.origin = origin
        self.diags = diags

    # -- token helpers --------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def advance(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def fail(self, msg: str, tok: Token | None = None):
        t = tok or self.tok
        span = t.span if t.kind != "eof" else Span(t.span.start, t.span.start)
        self.diags.append(Diagnostic(self.origin, span, msg))
        raise _Fail()

    def describe(self, t: Token) -> str:
        return "end of input" if t.kind == "eof" else repr(t.text)

    def expect_op(self, op: str) -> Token:
        if not self.tok.is_op(op):
            self.fail(f"expected '{op}' but found {self.describe(self.tok)}")
        return self.advance()

    def expect_kw(self, kw: str) -> Token:
        if not self.tok.is_kw(kw):
            self.fail(f"expected '{kw}' but found {self.describe(self.tok)}")
        return self.advance()

    def expect_id(self, what: str = "identifier") -> Token:
        if self.tok.kind != "id":
            self.fail(f"expected {what} but found {self.describe(self.tok)}")
        return self.advance()

    def span_from(self, start: int) -> Span:
        prev = self.toks[self.i - 1] if self.i > 0 else self.tok
        return Span(start, max(start, prev.span.end))

    # -- program --------------------------------------------------------------

    def program(self) -> list:
        defs = []
        while self.tok.kind != "eof":
            try:
                if self.tok.is_kw("func"):
                    defs.append(self.func_def())
                elif self.tok.is_kw("data"):
                    defs.append(self.data_def())
                else:
                    self.fail(f"expected 'func' or 'data' but found {self.describe(self.tok)}")
            except _Fail:
                self.sync()
        return defs

    def sync(self) -> None:
        self.advance()
        while self.tok.kind != "eof" and not self.tok.is_kw("func", "data"):
            self.advance()

    def func_head(self) -> A.FuncHead:
        start = self.expect_kw("func").span.start
        name = self.expect_id("function name").text
        self.expect_op("(")
        params = []
        if not self.tok.is_op(")"):
            while True:
                params.append(self.param())
                if not self.tok.is_op(","):
                    break
                self.advance()
        self.expect_op(")")
        self.expect_op("->")
        ret = self.type_()
        return A.FuncHead(name, tuple(params), ret, self.span_from(start))

    def param(self) -> A.Param:
        start = self.tok.span.start
        if self.tok.kind == "id" and self.peek().is_op(":"):
            name = self.advance().text
            self.advance()
            return A.Param(name, self.type_(), self.span_from(start))
        return A.Param(None, self.type_(), self.span_from(start))

    def func_def(self) -> A.FuncDef:
        start = self.tok.span.start
        head = self.func_head()
        self.expect_op("=")
        if self.tok.is_kw("foreign"):
            fstart = self.advance().span.start
            binding = java = None
            if self.tok.kind == "id" and self.tok.text == "java" and self.peek().kind == "id":
                self.advance()
                parts = [self.expect_id("class name").text]
                while self.tok.is_op("."):
                    self.advance()
                    parts.append(self.expect_id("class name").text)
                java = ".".join(parts)
                self.expect_op("#")
                binding = self.expect_id("method name").text
            elif self.tok.kind == "id":
                binding = self.advance().text
            body = A.ForeignBody(binding, java, self.span_from(fstart))
        else:
            body = self.expr()
        return A.FuncDef(head, body, self.span_from(start))

    def data_def(self) -> A.DataDef:
        start = self.expect_kw("data").span.start
        name = self.expect_id("data type name").text
        sup = None
        if self.tok.is_op(":"):
            self.advance()
            sup = self.expect_id("super type name").text
        if self.tok.is_op("="):
            self.advance()
        binding, java = None, False
        if self.tok.is_kw("foreign"):
            self.advance()
            if self.tok.kind == "id" and self.tok.text == "java" and self.peek().kind == "id":
                self.advance()
                java = True
                parts = [self.expect_id().text]
                while self.tok.is_op("."):
                    self.advance()
                    parts.append(self.expect_id().text)
                binding = ".".join(parts)
            elif self.tok.kind == "id":
                binding = self.advance().text
        self.expect_op("{")
        methods = []
        while not self.tok.is_op("}"):
            if self.tok.kind == "eof":
                self.fail("unterminated data definition, expected '}'")
            if self.tok.is_op(";"):
                self.advance()
                continue
            methods.append(self.func_head())
        self.advance()
        return A.DataDef(name, sup, binding, java, tuple(methods), self.span_from(start))

    # -- types ----------------------------------------------------------------

    def type_(self) -> A.TypeExpr:
        start = self.tok.span.start
        t = self.tok
        if t.is_kw(*A.PRIMITIVES):
            self.advance()
            ty: A.TypeExpr = A.TPrim(t.text, t.span)
        elif t.kind == "id":
            self.advance()
            ty = A.TNamed(t.text, t.span)
        elif t.is_op("("):
            self.advance()
            elems = [self.type_()]
            while self.tok.is_op(","):
                self.advance()
                elems.append(self.type_())
            self.expect_op(")")
            ty = elems[0] if len(elems) == 1 else A.TTuple(tuple(elems), self.span_from(start))
        else:
            self.fail(f"expected a type but found {self.describe(t)}")
        while self.tok.is_op("?", "*"):
            op = self.advance().text
            ty = A.TOptional(ty, self.span_from(start)) if op == "?" else A.TList(ty, self.span_from(start))
        return ty

    # -- expressions ------------------------------------------------------------

    def expr(self) -> A.Expr:
        t = self.tok
        start = t.span.start
        if t.is_kw("val"):
            self.advance()
            binder = self.binder()
            self.expect_op("=")
            rhs = self.expr()
            return A.Val(binder, rhs, self.span_from(start))
        if t.is_kw("if"):
            self.advance()
            self.expect_op("(")
            cond = self.expr()
            self.expect_op(")")
            then = self.expr()
            else_ = None
            if self.tok.is_kw("else"):
                self.advance()
                else_ = self.expr()
            return A.If(cond, then, else_, self.span_from(start))
        return self.keyword_form()

    def keyword_form(self) -> A.Expr:
        t = self.tok
        if not t.is_kw(*KEYWORD_FORMS):
            return self.or_()
        start = self.advance().span.start
        kw = t.text
        operand = self.or_()
        if kw == "requires":
            flt = self.filter_opt()
            st = self.stamper_opt()
            return A.Requires(operand, flt, st, self.span_from(start))
        if kw == "generates":
            return A.Generates(operand, self.stamper_opt(), self.span_from(start))
        if kw in ("list", "walk"):
            flt = self.filter_opt()
            cls = A.ListDir if kw == "list" else A.Walk
            return cls(operand, flt, self.span_from(start))
        cls = {"exists": A.Exists, "read": A.Read, "return": A.Return, "fail": A.Fail}[kw]
        return cls(operand, self.span_from(start))

    def filter_opt(self) -> A.FilterExpr | None:
        if not self.tok.is_kw("with"):
            return None
        start = self.advance().span.start
        kind = self.tok
        if kind.kind != "id" or kind.text not in FILTER_KINDS:
            self.fail(f"expected a filter ({', '.join(FILTER_KINDS)}) but found {self.describe(kind)}")
        self.advance()
        arg = self.or_()
        return A.FilterExpr(kind.text, arg, self.span_from(start))

    def stamper_opt(self) -> str | None:
        if not self.tok.is_kw("by"):
            return None
        self.advance()
        t = self.tok
        if not (t.kind == "id" and t.text in STAMPERS or t.is_kw("exists")):
            self.fail(f"expected a stamper ({', '.join(STAMPERS)}) but found {self.describe(t)}")
        self.advance()
        return t.text

    def _binary(self, ops: tuple[str, ...], sub: Callable[[], A.Expr]) -> A.Expr:
        start = self.tok.span.start
        left = sub()
        while self.tok.is_op(*ops):
            op = self.advance().text
            right = sub()
            left = A.Binary(op, left, right, self.span_from(start))
        return left

    def or_(self) -> A.Expr:
        return self._binary(("||",), self.and_)

    def and_(self) -> A.Expr:
        return self._binary(("&&",), self.eq)

    def eq(self) -> A.Expr:
        return self._binary(("==", "!="), self.add)

    def add(self) -> A.Expr:
        return self._binary(("+",), self.unary)

    def unary(self) -> A.Expr:
        if self.tok.is_op("!"):
            start = self.advance().span.start
            operand = self.unary()
            return A.Not(operand, self.span_from(start))
        return self.postfix()

    def postfix(self) -> A.Expr:
        start = self.tok.span.start
        e = self.primary()
        while True:
            if self.tok.is_op("!"):
                self.advance()
                e = A.NonNull(e, self.span_from(start))
            elif self.tok.is_op("."):
                self.advance()
                name = self.expect_id("method name").text
                args = self.args()
                e = A.MethodCall(e, name, args, self.span_from(start))
            else:
                return e

    def args(self) -> tuple[A.Expr, ...]:
        self.expect_op("(")
        out = []
        if not self.tok.is_op(")"):
            while True:
                out.append(self.expr())
                if not self.tok.is_op(","):
                    break
                self.advance()
        self.expect_op(")")
        return tuple(out)

    def primary(self) -> A.Expr:
        t = self.tok
        start = t.span.start
        if t.kind == "id":
            self.advance()
            if self.tok.is_op("("):
                return A.Call(t.text, self.args(), self.span_from(start))
            return A.Ref(t.text, t.span)
        if t.kind == "int":
            self.advance()
            value = int(t.text)
            if not INT_MIN <= value <= INT_MAX:
                self.fail("integer literal does not fit in 64 bits", t)
            return A.IntLit(value, t.span)
        if t.kind == "str":
            self.advance()
            return A.StrLit(self.parts(t), t.span)
        if t.kind == "path":
            self.advance()
            return A.PathLit(self.parts(t), t.text.startswith("."), t.span)
        if t.is_kw("true", "false"):
            self.advance()
            return A.BoolLit(t.text == "true", t.span)
        if t.is_kw("null"):
            self.advance()
            return A.NullLit(t.span)
        if t.is_kw("unit"):
            self.advance()
            return A.UnitLit(t.span)
        if t.is_op("("):
            self.advance()
            first = self.expr()
            if self.tok.is_op(","):
                elems = [first]
                while self.tok.is_op(","):
                    self.advance()
                    elems.append(self.expr())
                self.expect_op(")")
                return A.TupleLit(tuple(elems), self.span_from(start))
            self.expect_op(")")
            return A.Paren(first, self.span_from(start))
        if t.is_op("["):
            return self.list_or_comprehension()
        if t.is_op("{"):
            self.advance()
            stmts = []
            while not self.tok.is_op("}"):
                stmts.append(self.expr())
                if self.tok.is_op(";"):
                    self.advance()
                elif not self.tok.is_op("}"):
                    self.fail(f"expected ';' or '}}' but found {self.describe(self.tok)}")
            self.advance()
            return A.Block(tuple(stmts), self.span_from(start))
        if t.is_kw(*KEYWORD_FORMS, "val", "if"):
            self.fail(f"'{t.text}' must be parenthesized here")
        self.fail(f"expected an expression but found {self.describe(t)}")

    def list_or_comprehension(self) -> A.Expr:
        start = self.expect_op("[").span.start
        if self.tok.is_op("]"):
            self.advance()
            return A.ListLit((), self.span_from(start))
        first = self.expr()
        if self.tok.is_op("|"):
            self.advance()
            gens = [self.generator()]
            while self.tok.is_op(","):
                self.advance()
                gens.append(self.generator())
            self.expect_op("]")
            return A.Comprehension(first, tuple(gens), self.span_from(start))
        elems = [first]
        while self.tok.is_op(","):
            self.advance()
            elems.append(self.expr())
        self.expect_op("]")
        return A.ListLit(tuple(elems), self.span_from(start))

    def generator(self) -> A.Generator:
        start = self.tok.span.start
        binder = self.binder()
        self.expect_op("<-")
        source = self.expr()
        return A.Generator(binder, source, self.span_from(start))

    def binder(self) -> A.Binder:
        start = self.tok.span.start
        if self.tok.is_op("("):
            self.advance()
            binds = [self.bind()]
            while self.tok.is_op(","):
                self.advance()
                binds.append(self.bind())
            self.expect_op(")")
            if len(binds) < 2:
                self.diags.append(Diagnostic(self.origin, self.span_from(start),
                                             "tuple binder needs at least two names"))
                raise _Fail()
            return A.TupleBinder(tuple(binds), self.span_from(start))
        return self.bind()

    def bind(self) -> A.Bind:
        t = self.expect_id("a name")
        ty = None
        if self.tok.is_op(":"):
            self.advance()
            ty = self.type_()
        return A.Bind(t.text, ty, self.span_from(t.span.start))

    def parts(self, t: Token) -> tuple[Union[str, A.Expr], ...]:
        out: list = []
        for part in t.parts:
            if isinstance(part, Interp):
                sub = Parser(part.tokens, self.src, self.origin, self.diags)
                e = sub.expr()
                if sub.tok.kind != "eof":
                    sub.fail(f"unexpected {sub.describe(sub.tok)} in interpolation")
                out.append(e)
            elif part:
                out.append(part)
        return tuple(out)


def _run(source: str, origin: str, fn):
    diags: list[Diagnostic] = []
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 4000))
    try:
        try:
            toks = tokenize(source, origin)
        except DiagnosticError as err:
            raise DiagnosticError(err.diagnostics, source) from None
        p = Parser(toks, source, origin, diags)
        try:
            result = fn(p)
        except _Fail:
            result = None
        except RecursionError:
            diags.append(Diagnostic(origin, Span(p.tok.span.start, p.tok.span.end), "nesting too deep"))
            result = None
    finally:
        sys.setrecursionlimit(limit)
    if diags:
        raise DiagnosticError(diags, source)
    return result


def parse_program(source: str, origin: str = "<input>") -> A.Program:
    """Parse a whole program; raises DiagnosticError listing every syntax error."""
    defs = _run(source, origin, lambda p: p.program())
    return A.Program(tuple(defs), origin, source)


def parse_expression(source: str, origin: str = "<expr>") -> A.Expr:
    def go(p: Parser):
        e = p.expr()
        if p.tok.kind != "eof":
            p.fail(f"unexpected {p.describe(p.tok)} after expression")
        return e

    return _run(source, origin, go)

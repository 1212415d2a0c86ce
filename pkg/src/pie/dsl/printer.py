"""Pretty printer whose output parses back to an equal tree."""

from __future__ import annotations

from pie.dsl import ast as A
from pie.dsl.lexer import KEYWORDS, is_id_char

# precedence levels; a child printed below its required level is parenthesized
P_LOW, P_KW, P_OR, P_AND, P_EQ, P_ADD, P_UNARY, P_POST = range(8)
BIN_PREC = {"||": P_OR, "&&": P_AND, "==": P_EQ, "!=": P_EQ, "+": P_ADD}

STR_ESCAPES = {"\n": "\\n", "\t": "\\t", "\r": "\\r", '"': '\\"', "\\": "\\\\", "$": "\\$", "\0": "\\0"}
PATH_SPECIAL = set("\n\r\t ,;}])$\\")


def precedence(e: A.Expr) -> int:
    if isinstance(e, (A.Val, A.If)):
        return P_LOW
    if isinstance(e, (A.Requires, A.Generates, A.Exists, A.Read, A.ListDir, A.Walk, A.Return, A.Fail)):
        return P_KW
    if isinstance(e, A.Binary):
        return BIN_PREC[e.op]
    if isinstance(e, A.Not):
        return P_UNARY
    return P_POST


def format_type(t: A.TypeExpr) -> str:
    if isinstance(t, (A.TPrim, A.TNamed)):
        return t.name
    if isinstance(t, A.TOptional):
        return format_type(t.inner) + "?"
    if isinstance(t, A.TList):
        return format_type(t.inner) + "*"
    return "(" + ", ".join(format_type(e) for e in t.elems) + ")"


def _open_if(e: A.Expr) -> bool:
    """True if ``e`` printed bare ends in an ``if`` that would capture an ``else``."""
    if isinstance(e, A.If):
        return e.else_ is None or _open_if(e.else_)
    if isinstance(e, A.Val):
        return _open_if(e.rhs)
    return False


class Printer:
    def __init__(self, indent: str = "  "):
        self.unit = indent

    def program(self, prog: A.Program) -> str:
        return "\n\n".join(self.definition(d) for d in prog.defs) + "\n"

    def definition(self, d) -> str:
        if isinstance(d, A.DataDef):
            head = f"data {d.name}"
            if d.super:
                head += f" : {d.super}"
            head += " = foreign"
            if d.binding:
                head += (" java " if d.java else " ") + d.binding
            if not d.methods:
                return head + " {}"
            body = "\n".join(self.unit + self.head(m) for m in d.methods)
            return f"{head} {{\n{body}\n}}"
        text = self.head(d.head) + " ="
        if isinstance(d.body, A.ForeignBody):
            text += " foreign"
            if d.body.java_class:
                text += f" java {d.body.java_class}#{d.body.binding}"
            elif d.body.binding:
                text += " " + d.body.binding
            return text
        return text + " " + self.expr(d.body, P_LOW, "")

    def head(self, h: A.FuncHead) -> str:
        params = ", ".join((f"{p.name}: " if p.name else "") + format_type(p.type) for p in h.params)
        return f"func {h.name}({params}) -> {format_type(h.ret)}"

    def binder(self, b: A.Binder) -> str:
        if isinstance(b, A.TupleBinder):
            return "(" + ", ".join(self.binder(x) for x in b.binds) + ")"
        return b.name + (f": {format_type(b.type)}" if b.type is not None else "")

    def expr(self, e: A.Expr, min_prec: int, ind: str) -> str:
        text = self._expr(e, ind)
        if precedence(e) < min_prec:
            return "(" + text + ")"
        return text

    def _expr(self, e: A.Expr, ind: str) -> str:
        x = self.expr
        if isinstance(e, A.Block):
            if not e.stmts:
                return "{}"
            inner = ind + self.unit
            lines = [inner + x(s, P_LOW, inner) for s in e.stmts]
            return "{\n" + ";\n".join(lines) + "\n" + ind + "}"
        if isinstance(e, A.Paren):
            return "(" + x(e.expr, P_LOW, ind) + ")"
        if isinstance(e, A.Not):
            return "!" + x(e.expr, P_UNARY, ind)
        if isinstance(e, A.NonNull):
            return self.postfix_operand(e.expr, ind) + "!"
        if isinstance(e, A.Binary):
            p = BIN_PREC[e.op]
            return f"{x(e.left, p, ind)} {e.op} {x(e.right, p + 1, ind)}"
        if isinstance(e, A.If):
            then = x(e.then, P_LOW, ind)
            if e.else_ is not None and _open_if(e.then):
                then = "(" + then + ")"  # avoid the dangling else
            text = f"if ({x(e.cond, P_LOW, ind)}) {then}"
            if e.else_ is not None:
                text += f" else {x(e.else_, P_LOW, ind)}"
            return text
        if isinstance(e, A.Comprehension):
            gens = ", ".join(f"{self.binder(g.binder)} <- {x(g.source, P_LOW, ind)}" for g in e.generators)
            return f"[{x(e.body, P_LOW, ind)} | {gens}]"
        if isinstance(e, A.Val):
            return f"val {self.binder(e.binder)} = {x(e.rhs, P_LOW, ind)}"
        if isinstance(e, A.Ref):
            return e.name
        if isinstance(e, A.Call):
            return e.name + self.args(e.args, ind)
        if isinstance(e, A.MethodCall):
            return f"{self.postfix_operand(e.receiver, ind)}.{e.name}{self.args(e.args, ind)}"
        if isinstance(e, A.Requires):
            return "requires " + x(e.path, P_OR, ind) + self.filter(e.filter, ind) + self.stamper(e.stamper)
        if isinstance(e, A.Generates):
            return "generates " + x(e.path, P_OR, ind) + self.stamper(e.stamper)
        if isinstance(e, A.ListDir):
            return "list " + x(e.path, P_OR, ind) + self.filter(e.filter, ind)
        if isinstance(e, A.Walk):
            return "walk " + x(e.path, P_OR, ind) + self.filter(e.filter, ind)
        for cls, kw in ((A.Exists, "exists"), (A.Read, "read"), (A.Return, "return"), (A.Fail, "fail")):
            if isinstance(e, cls):
                return f"{kw} {x(e.expr if hasattr(e, 'expr') else e.path, P_OR, ind)}"
        if isinstance(e, A.UnitLit):
            return "unit"
        if isinstance(e, A.BoolLit):
            return "true" if e.value else "false"
        if isinstance(e, A.IntLit):
            return str(e.value)
        if isinstance(e, A.NullLit):
            return "null"
        if isinstance(e, A.TupleLit):
            return "(" + ", ".join(x(el, P_LOW, ind) for el in e.elems) + ")"
        if isinstance(e, A.ListLit):
            return "[" + ", ".join(x(el, P_LOW, ind) for el in e.elems) + "]"
        if isinstance(e, A.StrLit):
            return '"' + self.parts(e.parts, lambda s: "".join(STR_ESCAPES.get(c, c) for c in s), ind) + '"'
        if isinstance(e, A.PathLit):
            body = self.parts(e.parts, lambda s: "".join("\\" + c if c in PATH_SPECIAL else c for c in s), ind)
            if e.relative:
                return body if body.startswith("./") else "./" + body
            return body
        raise TypeError(f"cannot print {type(e).__name__}")

    def postfix_operand(self, e: A.Expr, ind: str) -> str:
        text = self.expr(e, P_POST, ind)
        # a path literal runs until whitespace, so separate it from the operator
        return text + " " if isinstance(e, A.PathLit) else text

    def args(self, args, ind: str) -> str:
        return "(" + ", ".join(self.expr(a, P_LOW, ind) for a in args) + ")"

    def filter(self, f: A.FilterExpr | None, ind: str) -> str:
        if f is None:
            return ""
        return f" with {f.kind} {self.expr(f.arg, P_OR, ind)}"

    @staticmethod
    def stamper(s: str | None) -> str:
        return f" by {s}" if s else ""

    def parts(self, parts, escape, ind: str) -> str:
        out = []
        for i, part in enumerate(parts):
            if isinstance(part, str):
                out.append(escape(part))
                continue
            nxt = parts[i + 1] if i + 1 < len(parts) else None
            bare_ok = (isinstance(part, A.Ref) and part.name not in KEYWORDS
                       and not (isinstance(nxt, str) and nxt and is_id_char(nxt[0])))
            out.append("$" + part.name if bare_ok else "${" + self.expr(part, P_LOW, ind) + "}")
        return "".join(out)


def pretty_print(node, indent: str = "  ") -> str:
    """Render a program, definition or expression as source text."""
    p = Printer(indent)
    if isinstance(node, A.Program):
        return p.program(node)
    if isinstance(node, (A.FuncDef, A.DataDef)):
        return p.definition(node)
    return p.expr(node, P_LOW, "")

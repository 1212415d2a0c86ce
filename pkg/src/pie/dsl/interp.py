"""Tree-walking evaluator that runs checked programs on the incremental runtime.

Every DSL function becomes a task whose input is its packed arguments (unit
for none, the value itself for one, a tuple for several). Calls go through
``ExecContext.require_call`` so they are cached and validated like any other
task; path operations record stamped dependencies before touching the disk.
"""

from __future__ import annotations

import os
import posixpath
import shutil
import subprocess
from dataclasses import dataclass
from typing import Any, Callable, Optional

from pie.dsl import ast as A
from pie.dsl.checker import (
    BOOL_T, INT_T, PATH_T, STR_T, UNIT_T, DataT, ListT, OptT, Prim, TupleT, Type, TypedProgram,
    entry_signature,
)
from pie.dsl.parser import parse_expression
from pie.errors import (
    ArgumentMismatch, ExecutableNotFound, NonSerializable, NullAssertionFailed, PieError, TaskFailed,
    UnknownFunction, UnknownMethod, UnresolvedForeign,
)
from pie.runtime import ExecContext, Session, TaskRegistry
from pie.stampers import Filter, FilterKind, PathStamper, list_entries
from pie.store import TaskKey
from pie.values import (
    FALSE, NULL, TRUE, UNIT, BoolV, ForeignType, ForeignV, IntV, ListV, NullV, PathV, StrV, Transient,
    TupleV, UnitV, Value, encode, equals, to_display_string,
)

HostFunction = Callable[..., Any]


@dataclass
class ForeignFunction:
    name: str
    arity: int
    fn: HostFunction
    task: bool = True


class ForeignRegistry:
    """Host functions and data types that ``foreign`` definitions bind to.

    A host function is called as ``fn(ctx, *args)`` with the task's
    ExecContext, so it can declare the files it reads. Functions registered
    with ``task=False`` run directly on every call instead of as cached tasks;
    that suits side-effecting helpers such as ``exec`` whose effects the
    calling task already tracks.
    """

    def __init__(self, cwd: str | None = None):
        self.functions: dict[str, ForeignFunction] = {}
        self.types: dict[str, ForeignType] = {}
        self.search_path: list[str] = []
        self.cwd = cwd

    def register(self, name: str, arity: int, function: HostFunction, *, task: bool = True) -> None:
        self.functions[name] = ForeignFunction(name, arity, function, task)

    def register_data(self, name: str, descriptor: ForeignType) -> None:
        self.types[name] = descriptor

    def function(self, name: str, arity: int, *, task: bool = True):
        def deco(fn: HostFunction) -> HostFunction:
            self.register(name, arity, fn, task=task)
            return fn

        return deco


# -- stdlib ------------------------------------------------------------------


def stdlib_exec(fr: ForeignRegistry, args: Value) -> TupleV:
    """Run a process to completion and return its (stdout, stderr)."""
    argv = [to_display_string(a) for a in args.elems] if isinstance(args, ListV) else []
    if not argv:
        raise TaskFailed("exec needs at least one argument")
    search = os.pathsep.join(fr.search_path + [os.environ.get("PATH", os.defpath)])
    exe = argv[0] if os.sep in argv[0] else shutil.which(argv[0], path=search)
    if exe is None or not os.path.exists(exe):
        raise ExecutableNotFound(argv[0])
    try:
        proc = subprocess.run([exe, *argv[1:]], cwd=fr.cwd, capture_output=True, text=True)
    except OSError as exc:
        raise ExecutableNotFound(f"{argv[0]}: {exc}") from exc
    if proc.returncode != 0:
        raise TaskFailed(f"{argv[0]} exited with status {proc.returncode}: {proc.stderr.strip()}")
    return TupleV((StrV(proc.stdout), StrV(proc.stderr)))


def replace_extension(p: PathV, ext: str) -> PathV:
    head, name = posixpath.split(p.value)
    stem, dot, _ = name.rpartition(".")
    name = f"{stem}.{ext}" if dot else f"{name}.{ext}"
    return PathV(posixpath.join(head, name) if head else name)


def stdlib_path_method(recv: PathV, name: str, args: list[Value]) -> Value:
    if name == "replaceExtension" and len(args) == 1 and isinstance(args[0], StrV):
        return replace_extension(recv, args[0].value)
    raise UnknownMethod(f"path has no method {name}/{len(args)}")


def install_stdlib(fr: ForeignRegistry) -> ForeignRegistry:
    fr.register("exec", 1, lambda ctx, args: stdlib_exec(fr, args), task=False)
    return fr


# -- evaluation ----------------------------------------------------------------


class _ReturnSignal(Exception):
    def __init__(self, value: Value):
        self.value = value


class Env:
    """Lexically chained frames of name to value."""

    def __init__(self, parent: Optional["Env"] = None, frame: Optional[dict] = None):
        self.parent = parent
        self.frame: dict[str, Value] = frame or {}

    def lookup(self, name: str) -> Value:
        env = self
        while env is not None:
            if name in env.frame:
                return env.frame[name]
            env = env.parent
        raise KeyError(name)

    def child(self) -> "Env":
        return Env(self)


def pack(args: list[Value]) -> Value:
    if not args:
        return UNIT
    if len(args) == 1:
        return args[0]
    return TupleV(tuple(args))


def unpack(value: Value, n: int) -> list[Value]:
    if n == 0:
        return []
    if n == 1:
        return [value]
    if not isinstance(value, TupleV) or len(value.elems) != n:
        raise ArgumentMismatch(f"expected {n} packed arguments")
    return list(value.elems)


_FILTER_KINDS = {
    "regex": FilterKind.REGEX, "pattern": FilterKind.PATTERN, "patterns": FilterKind.PATTERN,
    "extension": FilterKind.EXTENSION, "extensions": FilterKind.EXTENSION,
}


class Interpreter:
    def __init__(self, tp: TypedProgram, fr: ForeignRegistry, base_dir: str):
        self.tp = tp
        self.fr = fr
        self.base_dir = os.path.abspath(base_dir)
        self.funcs = {f.name: f for f in tp.program.funcs()}
        self.datas = {d.name: d for d in tp.program.datas()}

    # tasks ---------------------------------------------------------------------

    def task_impl(self, f: A.FuncDef):
        n = len(f.params)
        if f.is_foreign:
            ff = self.fr.functions[f.binding]

            def foreign_task(ctx: ExecContext, input: Value):
                return self.invoke_foreign(ff, ctx, unpack(input, n))

            return foreign_task

        names = [p.name for p in f.params]

        def dsl_task(ctx: ExecContext, input: Value):
            env = Env(frame=dict(zip(names, unpack(input, n))))
            try:
                result = self.eval(f.body, env, ctx)
            except _ReturnSignal as ret:
                result = ret.value
            try:
                encode(result)
            except NonSerializable:
                return Transient(result)
            return result

        return dsl_task

    def invoke_foreign(self, ff: ForeignFunction, ctx: ExecContext, args: list[Value]):
        out = ff.fn(ctx, *args)
        if not isinstance(out, (Value, Transient)):
            raise TaskFailed(f"foreign function {ff.name} returned {type(out).__name__}, not a value")
        return out

    def call(self, name: str, args: list[Value], ctx: ExecContext) -> Value:
        f = self.funcs[name]
        if f.is_foreign:
            ff = self.fr.functions[f.binding]
            if not ff.task:
                out = self.invoke_foreign(ff, ctx, args)
                return out.value if isinstance(out, Transient) else out
        return ctx.require_call(TaskKey.of(name, pack(args)))

    # paths -------------------------------------------------------------------

    def path_literal(self, e: A.PathLit, env: Env, ctx: ExecContext) -> PathV:
        text = "".join(p if isinstance(p, str) else to_display_string(self.eval(p, env, ctx)) for p in e.parts)
        if e.relative:
            return PathV(posixpath.join(self.base_dir, text))
        return PathV(text)

    def make_filter(self, f: Optional[A.FilterExpr], env: Env, ctx: ExecContext) -> Optional[Filter]:
        if f is None:
            return None
        arg = self.eval(f.arg, env, ctx)
        items = arg.elems if isinstance(arg, ListV) else (arg,)
        return Filter(_FILTER_KINDS[f.kind], tuple(to_display_string(i) for i in items))

    def walk(self, root: PathV, flt: Optional[Filter], ctx: ExecContext) -> ListV:
        out: list[PathV] = []

        def visit(directory: str, rel: str) -> None:
            dir_filter = None if flt is None else Filter(flt.kind, flt.args, dirs=True, base=rel)
            ctx.require_path(directory, PathStamper.MODIFIED, dir_filter)
            if not os.path.isdir(directory):
                return
            for name, is_dir in list_entries(directory, dir_filter):
                child = posixpath.join(directory, name)
                if is_dir:
                    visit(child, posixpath.join(rel, name) if rel else name)
                else:
                    out.append(PathV(child))

        visit(root.value, "")
        return ListV(tuple(out))

    # expressions -------------------------------------------------------------

    def eval(self, e: A.Expr, env: Env, ctx: ExecContext) -> Value:
        ev = self.eval
        if isinstance(e, A.Block):
            inner = env.child()
            result: Value = UNIT
            for s in e.stmts:
                result = ev(s, inner, ctx)
            return result
        if isinstance(e, A.Paren):
            return ev(e.expr, env, ctx)
        if isinstance(e, A.Val):
            self.bind(env, e.binder, ev(e.rhs, env, ctx))
            return UNIT
        if isinstance(e, A.Ref):
            return env.lookup(e.name)
        if isinstance(e, A.Call):
            return self.call(e.name, [ev(a, env, ctx) for a in e.args], ctx)
        if isinstance(e, A.MethodCall):
            recv = ev(e.receiver, env, ctx)
            args = [ev(a, env, ctx) for a in e.args]
            return self.method(recv, e, args, ctx)
        if isinstance(e, A.If):
            if ev(e.cond, env, ctx).value:
                out = ev(e.then, env.child(), ctx)
            elif e.else_ is not None:
                out = ev(e.else_, env.child(), ctx)
            return out if e.else_ is not None else UNIT
        if isinstance(e, A.Comprehension):
            results: list[Value] = []
            self.comprehend(e, 0, env, ctx, results)
            return ListV(tuple(results))
        if isinstance(e, A.Binary):
            return self.binary(e, env, ctx)
        if isinstance(e, A.Not):
            return FALSE if ev(e.expr, env, ctx).value else TRUE
        if isinstance(e, A.NonNull):
            v = ev(e.expr, env, ctx)
            if isinstance(v, NullV):
                raise NullAssertionFailed(f"null value at offset {e.span.start}")
            return v
        if isinstance(e, A.Requires):
            target = ev(e.path, env, ctx)
            flt = self.make_filter(e.filter, env, ctx)
            stamper = PathStamper(e.stamper or "modified")
            for p in target.elems if isinstance(target, ListV) else (target,):
                ctx.require_path(p, stamper, flt)
            return UNIT
        if isinstance(e, A.Generates):
            ctx.generate_path(ev(e.path, env, ctx), PathStamper(e.stamper or "hash"))
            return UNIT
        if isinstance(e, A.Exists):
            p = ev(e.path, env, ctx)
            ctx.require_path(p, PathStamper.EXISTS)
            return TRUE if os.path.exists(p.value) else FALSE
        if isinstance(e, A.Read):
            p = ev(e.path, env, ctx)
            ctx.require_path(p, PathStamper.HASH)
            try:
                with open(p.value, encoding="utf-8") as fh:
                    return StrV(fh.read())
            except (OSError, UnicodeDecodeError) as exc:
                raise TaskFailed(f"cannot read {p.value}: {exc}") from exc
        if isinstance(e, A.ListDir):
            p = ev(e.path, env, ctx)
            flt = self.make_filter(e.filter, env, ctx)
            ctx.require_path(p, PathStamper.MODIFIED, flt)
            if not os.path.isdir(p.value):
                return ListV(())
            return ListV(tuple(p.join(name) for name, _ in list_entries(p.value, flt)))
        if isinstance(e, A.Walk):
            return self.walk(ev(e.path, env, ctx), self.make_filter(e.filter, env, ctx), ctx)
        if isinstance(e, A.Return):
            raise _ReturnSignal(ev(e.expr, env, ctx))
        if isinstance(e, A.Fail):
            raise TaskFailed(to_display_string(ev(e.expr, env, ctx)))
        if isinstance(e, A.UnitLit):
            return UNIT
        if isinstance(e, A.BoolLit):
            return TRUE if e.value else FALSE
        if isinstance(e, A.IntLit):
            return IntV(e.value)
        if isinstance(e, A.NullLit):
            return NULL
        if isinstance(e, A.TupleLit):
            return TupleV(tuple(ev(x, env, ctx) for x in e.elems))
        if isinstance(e, A.ListLit):
            return ListV(tuple(ev(x, env, ctx) for x in e.elems))
        if isinstance(e, A.StrLit):
            return StrV("".join(p if isinstance(p, str) else to_display_string(ev(p, env, ctx)) for p in e.parts))
        if isinstance(e, A.PathLit):
            return self.path_literal(e, env, ctx)
        raise TypeError(f"unknown expression {type(e).__name__}")

    def bind(self, env: Env, binder: A.Binder, value: Value) -> None:
        if isinstance(binder, A.Bind):
            env.frame[binder.name] = value
            return
        for b, v in zip(binder.binds, value.elems):
            env.frame[b.name] = v

    def comprehend(self, e: A.Comprehension, i: int, env: Env, ctx: ExecContext, out: list) -> None:
        if i == len(e.generators):
            out.append(self.eval(e.body, env, ctx))
            return
        g = e.generators[i]
        for item in self.eval(g.source, env, ctx).elems:
            inner = env.child()
            self.bind(inner, g.binder, item)
            self.comprehend(e, i + 1, inner, ctx, out)

    def binary(self, e: A.Binary, env: Env, ctx: ExecContext) -> Value:
        if e.op == "&&":
            return TRUE if self.eval(e.left, env, ctx).value and self.eval(e.right, env, ctx).value else FALSE
        if e.op == "||":
            return TRUE if self.eval(e.left, env, ctx).value or self.eval(e.right, env, ctx).value else FALSE
        a = self.eval(e.left, env, ctx)
        b = self.eval(e.right, env, ctx)
        if e.op == "==":
            return TRUE if equals(a, b) else FALSE
        if e.op == "!=":
            return FALSE if equals(a, b) else TRUE
        rule = self.tp.plus_rules[id(e)]
        if rule == "int":
            return IntV(a.value + b.value)
        if rule == "str":
            return StrV(a.value + b.value)
        if rule == "path":
            return PathV(a.value + b.value)
        if rule == "concat":
            return ListV(a.elems + b.elems)
        return ListV(a.elems + (b,))

    def method(self, recv: Value, e: A.MethodCall, args: list[Value], ctx: ExecContext) -> Value:
        if isinstance(recv, PathV):
            return stdlib_path_method(recv, e.name, args)
        if isinstance(recv, NullV):
            raise NullAssertionFailed(f"method {e.name} called on null")
        if not isinstance(recv, ForeignV):
            raise UnknownMethod(f"{type(recv).__name__} has no method {e.name}")
        fn = recv.ftype.methods.get(e.name)
        if fn is None:
            owner = self.tp.resolutions.get(id(e), (None,))[0]
            d = self.datas.get(owner)
            desc = self.fr.types.get(d.binding_name) if d is not None else None
            fn = desc.methods.get(e.name) if desc is not None else None
        if fn is None:
            raise UnknownMethod(f"{recv.type_name} has no method {e.name}")
        out = fn(ctx, recv, *args)
        return out.value if isinstance(out, Transient) else out


def register_program(tp: TypedProgram, fr: ForeignRegistry, reg: TaskRegistry,
                     base_dir: str | None = None) -> Interpreter:
    """Install every function of ``tp`` as a task in ``reg``."""
    if base_dir is None:
        origin = tp.program.origin
        base_dir = os.path.dirname(os.path.abspath(origin)) if not origin.startswith("<") else os.getcwd()
    for d in tp.program.datas():
        desc = fr.types.get(d.binding_name)
        if desc is None:
            raise UnresolvedForeign(d.binding_name)
        reg.register_type(desc)
    for f in tp.program.funcs():
        if f.is_foreign:
            ff = fr.functions.get(f.binding)
            if ff is None:
                raise UnresolvedForeign(f.binding)
            if ff.arity != len(f.params):
                raise ArgumentMismatch(f"foreign {f.binding} takes {ff.arity} argument(s), "
                                       f"declared with {len(f.params)}")
    interp = Interpreter(tp, fr, base_dir)
    for f in tp.program.funcs():
        reg.register(f.name, interp.task_impl(f))
    return interp


# -- entry points ----------------------------------------------------------------


def conforms(tp: TypedProgram, fr: ForeignRegistry, v: Value, t: Type) -> bool:
    """Whether runtime value ``v`` inhabits static type ``t``."""
    if isinstance(t, OptT):
        return isinstance(v, NullV) or conforms(tp, fr, v, t.inner)
    if isinstance(t, Prim):
        cls = {UNIT_T: UnitV, BOOL_T: BoolV, INT_T: IntV, STR_T: StrV, PATH_T: PathV}[t]
        return isinstance(v, cls)
    if isinstance(t, ListT):
        return isinstance(v, ListV) and all(conforms(tp, fr, x, t.inner) for x in v.elems)
    if isinstance(t, TupleT):
        return (isinstance(v, TupleV) and len(v.elems) == len(t.elems)
                and all(conforms(tp, fr, x, y) for x, y in zip(v.elems, t.elems)))
    if isinstance(t, DataT):
        if not isinstance(v, ForeignV):
            return False
        names = set()
        for d in tp.program.datas():
            if t.name in tp.supers(d.name):
                desc = fr.types.get(d.binding_name)
                names.add(desc.name if desc is not None else d.name)
        return v.type_name in names
    return False


def call_entry(session: Session, tp: TypedProgram, func: str, args: list[Value],
               fr: ForeignRegistry | None = None) -> Value:
    params, _ = entry_signature(tp, func)
    if func not in session.registry:
        raise UnknownFunction(func)
    if len(args) != len(params):
        raise ArgumentMismatch(f"{func} takes {len(params)} argument(s) but {len(args)} given")
    for i, (a, t) in enumerate(zip(args, params)):
        if not conforms(tp, fr or ForeignRegistry(), a, t):
            raise ArgumentMismatch(f"argument {i + 1} of {func} is {to_display_string(a)!r}, expected {t}")
    out = session.require(TaskKey.of(func, pack(args)))
    return out.value if isinstance(out, Transient) else out


def literal_value(e: A.Expr, base_dir: str) -> Value:
    """Evaluate a constant expression (no references, calls or effects)."""
    if isinstance(e, A.Paren):
        return literal_value(e.expr, base_dir)
    if isinstance(e, A.UnitLit):
        return UNIT
    if isinstance(e, A.NullLit):
        return NULL
    if isinstance(e, A.BoolLit):
        return TRUE if e.value else FALSE
    if isinstance(e, A.IntLit):
        return IntV(e.value)
    if isinstance(e, (A.StrLit, A.PathLit)) and all(isinstance(p, str) for p in e.parts):
        text = "".join(e.parts)
        if isinstance(e, A.StrLit):
            return StrV(text)
        return PathV(posixpath.join(base_dir, text) if e.relative else text)
    if isinstance(e, A.ListLit):
        try:
            return ListV(tuple(literal_value(x, base_dir) for x in e.elems))
        except TypeError as exc:
            raise ArgumentMismatch(str(exc)) from exc
    if isinstance(e, A.TupleLit):
        return TupleV(tuple(literal_value(x, base_dir) for x in e.elems))
    raise ArgumentMismatch("argument is not a literal")


def parse_argument(text: str, t: Type, base_dir: str) -> Value:
    """Parse a command-line argument as a literal of type ``t``.

    Bare text that is not a valid literal is accepted for string and path
    parameters, so ``some-text`` needs no extra quoting.
    """
    try:
        v = literal_value(parse_expression(text, "<argument>"), base_dir)
    except PieError:
        v = None
    if t == STR_T and not isinstance(v, StrV):
        return StrV(text)
    if t == PATH_T and not isinstance(v, PathV):
        return PathV(posixpath.join(base_dir, text))
    if v is None:
        raise ArgumentMismatch(f"cannot parse argument {text!r} as {t}")
    return v


__all__ = [
    "Env", "ForeignFunction", "ForeignRegistry", "Interpreter", "call_entry", "conforms",
    "install_stdlib", "literal_value", "pack", "parse_argument", "register_program",
    "replace_extension", "stdlib_exec", "stdlib_path_method", "unpack",
]

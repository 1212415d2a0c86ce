import builtins
import os
import pathlib
import posixpath

import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import write
from pie.corpus import program_source, register_foreign_stubs
from pie.dsl import parse_program
from pie.dsl.checker import INT_T, PATH_T, STR_T, ListT, check
from pie.dsl.interp import (
    ForeignRegistry,
    call_entry,
    install_stdlib,
    parse_argument,
    register_program,
    replace_extension,
    stdlib_exec,
    stdlib_path_method,
)
from pie.errors import (
    ArgumentMismatch,
    ExecutableNotFound,
    IntOverflow,
    NullAssertionFailed,
    TaskFailed,
    UnknownFunction,
    UnknownMethod,
    UnresolvedForeign,
)
from pie.runtime import Pie, TaskRegistry
from pie.stampers import FilterKind, PathStamper
from pie.store import RequireDep, Store, TaskKey
from pie.values import NULL, IntV, ListV, PathV, StrV, TupleV


class Program:
    """A checked program registered on a fresh in-memory store."""

    def __init__(self, src, base_dir, fr=None):
        origin = os.path.join(base_dir, "main.pie")
        self.tp = check(parse_program(src, origin))
        self.fr = fr or install_stdlib(ForeignRegistry(base_dir))
        self.reg = TaskRegistry()
        register_program(self.tp, self.fr, self.reg)
        self.pie = Pie(Store(None), self.reg)

    def run(self, func, *args):
        with self.pie.session() as s:
            out = call_entry(s, self.tp, func, list(args), self.fr)
        self.last = s
        return out

    def deps(self, func, *args):
        from pie.dsl.interp import pack
        return self.pie.store.get_task(TaskKey.of(func, pack(list(args)))).deps


def test_register_program_installs_every_function(tmp):
    fr = install_stdlib(ForeignRegistry(tmp))
    register_foreign_stubs(fr)
    tp = check(parse_program(program_source("editor"), os.path.join(tmp, "editor.pie")))
    reg = TaskRegistry()
    register_program(tp, fr, reg)
    register_program(tp, fr, reg)
    assert {"normalize", "extract-deps", "generate-table", "exec", "parse", "style", "table2object",
            "update-editor"} <= set(reg.tasks)


def test_missing_exec_binding(tmp):
    tp = check(parse_program(program_source("editor"), os.path.join(tmp, "editor.pie")))
    fr = ForeignRegistry(tmp)
    register_foreign_stubs(fr)
    with pytest.raises(UnresolvedForeign) as exc:
        register_program(tp, fr, TaskRegistry())
    assert exc.value.name == "exec"


def test_foreign_arity_must_match(tmp):
    fr = ForeignRegistry(tmp)
    fr.register("h", 2, lambda ctx, a, b: a)
    tp = check(parse_program("func h(int) -> int = foreign", "x.pie"))
    with pytest.raises(ArgumentMismatch):
        register_program(tp, fr, TaskRegistry())


def test_requires_by_hash_records_dependency(tmp):
    write(os.path.join(tmp, "a.jar"), "jar")
    p = Program("func f(jar: path) -> unit = requires jar by hash", tmp)
    jar = PathV(os.path.join(tmp, "a.jar"))
    p.run("f", jar)
    (dep,) = p.deps("f", jar)
    assert isinstance(dep, RequireDep) and dep.path == jar.value and dep.stamper is PathStamper.HASH


def test_filtered_requires_per_directory(tmp):
    p = Program('func f(dirs: path*) -> unit = { [requires dir with extension "sdf" | dir <- dirs]; unit }', tmp)
    dirs = ListV((PathV(os.path.join(tmp, "inc1")), PathV(os.path.join(tmp, "inc2"))))
    p.run("f", dirs)
    deps = p.deps("f", dirs)
    assert [d.path for d in deps] == [d.value for d in dirs.elems]
    assert all(d.filter.kind is FilterKind.EXTENSION and d.filter.args == ("sdf",) for d in deps)


def test_walk_matches_recursive_scan(tmp):
    for rel in ("main.calc", "lib/util.calc", "lib/deep/x.sql", "notes.txt", "lib/readme.md"):
        write(os.path.join(tmp, "project", rel), rel)
    p = Program('func f(p: path) -> path* = walk p with extensions ["calc", "sql"]', tmp)
    root = os.path.join(tmp, "project")
    out = p.run("f", PathV(root))
    expected = sorted(str(x) for x in pathlib.Path(root).rglob("*") if x.suffix in (".calc", ".sql"))
    assert sorted(v.value for v in out.elems) == expected
    # depth-first preorder with sorted siblings
    assert [v.value[len(root) + 1:] for v in out.elems] == ["lib/deep/x.sql", "lib/util.calc", "main.calc"]
    visited = [d.path for d in p.deps("f", PathV(root))]
    assert visited == [root, root + "/lib", root + "/lib/deep"]


def test_walk_notices_new_matching_file_only(tmp):
    root = os.path.join(tmp, "project")
    write(os.path.join(root, "sub", "a.calc"), "a")
    p = Program('func f(p: path) -> path* = walk p with extension "calc"', tmp)
    p.run("f", PathV(root))
    write(os.path.join(root, "sub", "ignored.txt"), "x")
    p.run("f", PathV(root))
    assert p.last.total_executions == 0
    write(os.path.join(root, "sub", "b.calc"), "b")
    assert len(p.run("f", PathV(root)).elems) == 2


def test_list_is_not_recursive(tmp):
    write(os.path.join(tmp, "d", "a.txt"), "a")
    write(os.path.join(tmp, "d", "s", "b.txt"), "b")
    p = Program("func f(p: path) -> path* = list p", tmp)
    out = p.run("f", PathV(os.path.join(tmp, "d")))
    assert [posixpath.basename(v.value) for v in out.elems] == ["a.txt", "s"]


def test_read_records_hash_dependency(tmp):
    write(os.path.join(tmp, "workspace.cfg"), "calc = langs/calc")
    p = Program('func f(root: path) -> string = read(root + "/workspace.cfg")', tmp)
    assert p.run("f", PathV(tmp)) == StrV("calc = langs/calc")
    (dep,) = p.deps("f", PathV(tmp))
    assert dep.stamper is PathStamper.HASH and dep.path.endswith("workspace.cfg")


def test_exists_and_relative_literals(tmp):
    write(os.path.join(tmp, "here.txt"), "x")
    p = Program("func f() -> (bool, bool) = (exists ./here.txt, exists ./gone.txt)", tmp)
    assert p.run("f") == TupleV((p.run("f").elems[0], p.run("f").elems[1]))
    assert [x.value for x in p.run("f").elems] == [True, False]
    assert {d.stamper for d in p.deps("f")} == {PathStamper.EXISTS}


def test_null_checks(tmp):
    p = Program("func f(t: int?) -> int? = if (t != null) t + 1 else null\n"
                "func g(t: int?) -> int = t!", tmp)
    assert p.run("f", NULL) == NULL
    assert p.run("f", IntV(1)) == IntV(2)
    with pytest.raises(NullAssertionFailed):
        p.run("g", NULL)


def test_return_fail_and_overflow(tmp):
    p = Program('func f(x: int) -> int = { if (x == 0) return 10; x }\n'
                'func g() -> int = fail "broken ${1 + 1}"\n'
                'func h(x: int) -> int = x + 1', tmp)
    assert p.run("f", IntV(0)) == IntV(10)
    assert p.run("f", IntV(3)) == IntV(3)
    with pytest.raises(TaskFailed, match="broken 2"):
        p.run("g")
    with pytest.raises(IntOverflow):
        p.run("h", IntV(2**63 - 1))


def test_interpolation_and_append(tmp):
    p = Program('func f(file: path, jar: path) -> string* = ["java", "-jar", "$jar"] + "-o$file" + ["x"]', tmp)
    out = p.run("f", PathV("a.sdf"), PathV("/b.jar"))
    assert [s.value for s in out.elems] == ["java", "-jar", "/b.jar", "-oa.sdf", "x"]


@given(st.lists(st.integers(-1000, 1000), max_size=8))
def test_comprehension_law(xs):
    p = _comprehension_program()
    out = p.run("f", ListV(tuple(IntV(x) for x in xs)))
    assert [v.value for v in out.elems] == [x + x for x in xs]


_PROG = {}


def _comprehension_program():
    if "p" not in _PROG:
        _PROG["p"] = Program("func double(x: int) -> int = x + x\n"
                             "func f(l: int*) -> int* = [double(x) | x <- l]", "/tmp")
    return _PROG["p"]


def test_dsl_calls_are_cached(tmp):
    p = Program("func leaf(x: int) -> int = x + 1\nfunc f(x: int) -> int = leaf(x) + leaf(x)", tmp)
    assert p.run("f", IntV(1)) == IntV(4)
    assert p.last.executions_of("leaf") == 1
    p.run("f", IntV(1))
    assert p.last.total_executions == 0


def test_call_entry_errors(tmp):
    p = Program("func f(x: int) -> int = x", tmp)
    with pytest.raises(ArgumentMismatch):
        p.run("f")
    with pytest.raises(ArgumentMismatch):
        p.run("f", StrV("x"))
    with pytest.raises(UnknownFunction):
        p.run("nope")


def test_replace_extension_examples():
    assert replace_extension(PathV("a/lexical.sdf"), "norm") == PathV("a/lexical.norm")
    assert replace_extension(PathV("a/noext"), "dep") == PathV("a/noext.dep")
    assert replace_extension(PathV("a.b.c"), "x") == PathV("a.b.x")
    with pytest.raises(UnknownMethod):
        stdlib_path_method(PathV("a"), "nope", [])


NAME = st.from_regex(r"[a-z]{1,4}(\.[a-z]{1,3}){0,3}", fullmatch=True)


@given(st.lists(st.sampled_from(["a", "src", "x.y"]), max_size=2), NAME, st.from_regex(r"[a-z]{1,3}", fullmatch=True))
def test_replace_extension_matches_pathlib(dirs, name, ext):
    # pathlib's suffix rules agree with ours for names without leading or trailing dots
    p = "/".join(dirs + [name])
    assert replace_extension(PathV(p), ext).value == str(pathlib.PurePosixPath(p).with_suffix("." + ext))


def test_exec(tmp):
    fr = ForeignRegistry(tmp)
    assert stdlib_exec(fr, ListV((StrV("echo"), StrV("hi")))) == TupleV((StrV("hi\n"), StrV("")))
    with pytest.raises(TaskFailed, match="status 1"):
        stdlib_exec(fr, ListV((StrV("false"),)))
    with pytest.raises(ExecutableNotFound):
        stdlib_exec(fr, ListV((StrV("no-such-tool-xyz"),)))


def test_exec_is_not_cached_as_a_task(tmp):
    p = Program('func exec(arguments: string*) -> (string, string) = foreign\n'
                'func f() -> string = { val (out, err) = exec(["echo", "hi"]); out }', tmp)
    assert p.run("f") == StrV("hi\n")
    assert p.last.executions_of("exec") == 0 and p.pie.store.get_task(TaskKey.of("exec", ListV((StrV("echo"), StrV("hi"))))) is None


def test_parse_argument(tmp):
    assert parse_argument('["-wi", "0"]', ListT(STR_T), tmp) == ListV((StrV("-wi"), StrV("0")))
    assert parse_argument("some text", STR_T, tmp) == StrV("some text")
    assert parse_argument("42", STR_T, tmp) == StrV("42")
    assert parse_argument("./x", PATH_T, tmp) == PathV(os.path.join(tmp, "x"))
    assert parse_argument("rel/y", PATH_T, tmp) == PathV(os.path.join(tmp, "rel/y"))
    assert parse_argument("-3", INT_T, tmp) == IntV(-3)
    with pytest.raises(ArgumentMismatch):
        parse_argument("x +", INT_T, tmp)


def test_reads_are_covered_by_dependencies(tmp, monkeypatch):
    """Every file the evaluator opens or lists is recorded with a dependency."""
    root = os.path.join(tmp, "ws")
    write(os.path.join(root, "workspace.cfg"), "calc = langs/calc")
    write(os.path.join(root, "langs", "calc", "syntax.sdf"), "keywords: let")
    write(os.path.join(root, "langs", "calc", "styling.esv"), "keyword = blue")
    write(os.path.join(root, "project", "a.calc"), "let x")
    fr = install_stdlib(ForeignRegistry(root))
    register_foreign_stubs(fr)
    with open(os.path.join(root, "spoofax.pie"), "w") as fh:
        fh.write(program_source("spoofax"))
    p = Program(program_source("spoofax"), root, fr)

    touched = set()
    real_open, real_scandir = builtins.open, os.scandir

    def spy_open(file, *a, **k):
        if isinstance(file, str) and file.startswith(root):
            touched.add(("file", file))
        return real_open(file, *a, **k)

    def spy_scandir(path="."):
        if isinstance(path, str) and path.startswith(root):
            touched.add(("dir", path))
        return real_scandir(path)

    monkeypatch.setattr(builtins, "open", spy_open)
    monkeypatch.setattr(os, "scandir", spy_scandir)
    p.run("updateProject", PathV(root), PathV(os.path.join(root, "project")))
    monkeypatch.undo()

    required = {}
    for _, data in p.pie.store.tasks():
        for d in data.deps:
            if isinstance(d, RequireDep):
                required.setdefault(d.path, set()).add(d.stamper)
    for kind, path in touched:
        assert path in required, (kind, path)
        if kind == "file" and not os.path.isdir(path):
            # content reads need a stamper that sees content changes
            assert required[path] & {PathStamper.HASH, PathStamper.MODIFIED}, path

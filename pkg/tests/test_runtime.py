import os

import pytest

from helpers import bump_mtime, write
from pie.corpus.editors import register_editor_tasks
from pie.errors import CycleDetected, HiddenDepError, OverlapError, TaskFailed, UnknownTask
from pie.runtime import Pie, TaskRegistry, export_dep_graph, new_session
from pie.stampers import PathStamper
from pie.store import CallDep, GenerateDep, RequireDep, Store, TaskKey
from pie.values import UNIT, IntV, PathV, StrV, Transient, TupleV


def run(pie, func, value):
    with pie.session() as s:
        out = s.call(func, value)
    return out, s


# -- editor scenario ----------------------------------------------------------------


@pytest.fixture
def editor(tmp):
    write(os.path.join(tmp, "syntax.sdf3"), "keywords: let in\n")
    reg = TaskRegistry()
    register_editor_tasks(reg, tmp)
    return tmp, Pie(Store(None), reg)


def update_both(pie, texts):
    with pie.session() as s:
        outs = [s.call("update-editor", StrV(t)) for t in texts]
    return outs, s


def test_new_session_starts_empty():
    s = new_session(Store(None), TaskRegistry())
    assert not s.consistent and s.total_executions == 0


def test_editor_initial_and_unchanged(editor):
    _, pie = editor
    _, s = update_both(pie, ["let x", "in y"])
    assert (s.executions_of("update-editor"), s.executions_of("parse"), s.executions_of("generate-table")) == (2, 2, 1)
    _, s = update_both(pie, ["let x", "in y"])
    assert s.total_executions == 0


def test_editor_buffer_change(editor):
    _, pie = editor
    update_both(pie, ["let x", "in y"])
    _, s = update_both(pie, ["let z", "in y"])
    assert s.total_executions == 2
    assert s.executions_of("update-editor") == 1 and s.executions_of("parse") == 1


def test_editor_syntax_change(editor):
    root, pie = editor
    update_both(pie, ["let x", "in y"])
    write(os.path.join(root, "syntax.sdf3"), "keywords: let in x\n")
    outs, s = update_both(pie, ["let x", "in y"])
    assert s.executions_of("generate-table") == 1 and s.executions_of("parse") == 2
    assert StrsOf(outs[0])[1] == "keyword:x"


def StrsOf(out):
    return [e.value for e in out.elems[0].elems]


def test_update_editor_records_calls_in_order(editor):
    root, pie = editor
    update_both(pie, ["let x"])
    data = pie.store.get_task(TaskKey.of("update-editor", StrV("let x")))
    assert [d.callee.func_id for d in data.deps] == ["generate-table", "parse"]


def test_parse_infers_dependency_on_generator(editor):
    root, pie = editor
    update_both(pie, ["let x"])
    table = PathV(os.path.join(root, "parse.tbl"))
    gen = pie.store.get_generator(table.value)
    assert gen is not None and gen.func_id == "generate-table"
    parse_key = TaskKey.of("parse", TupleV((table, StrV("let x"))))
    deps = pie.store.get_task(parse_key).deps
    assert isinstance(deps[0], CallDep) and deps[0].callee == gen
    assert isinstance(deps[1], RequireDep) and deps[1].path == table.value


def test_dependency_graph_matches_store(editor):
    _, pie = editor
    update_both(pie, ["a", "b"])
    g = export_dep_graph(pie.store)
    assert len(g.tasks) == 5
    assert len(g.edges) == sum(len(d.deps) for _, d in pie.store.tasks())
    calls = {(a.func_id, b.func_id) for a, b, kind in g.edges if kind == "call"}
    assert ("parse", "generate-table") in calls
    dot = g.to_dot()
    assert dot.startswith("digraph") and dot.count("kind=call") == sum(1 for e in g.edges if e[2] == "call")
    assert export_dep_graph(Store(None)).to_dot() == "digraph pie {\n}\n"


# -- host API -------------------------------------------------------------------


def test_task_executes_once_per_session():
    reg = TaskRegistry()
    calls = []

    @reg.task("leaf")
    def leaf(ctx, v):
        calls.append(v)
        return v

    @reg.task("root")
    def root(ctx, v):
        return TupleV((ctx.call("leaf", v), ctx.call("leaf", v)))

    pie = Pie(Store(None), reg)
    out, s = run(pie, "root", IntV(1))
    assert out == TupleV((IntV(1), IntV(1))) and len(calls) == 1


def test_callee_output_change_invalidates_caller(tmp):
    src = os.path.join(tmp, "n")
    write(src, "1")
    reg = TaskRegistry()

    @reg.task("read")
    def read(ctx, p):
        ctx.require_path(p, PathStamper.HASH)
        return IntV(int(open(p.value).read()))

    @reg.task("double")
    def double(ctx, p):
        return IntV(2 * ctx.call("read", p).value)

    pie = Pie(Store(None), reg)
    assert run(pie, "double", PathV(src))[0] == IntV(2)
    write(src, "5")
    out, s = run(pie, "double", PathV(src))
    assert out == IntV(10) and s.executions_of("double") == 1


def test_cutoff_when_callee_output_is_unchanged(tmp):
    src = os.path.join(tmp, "n")
    write(src, "1")
    reg = TaskRegistry()

    @reg.task("parity")
    def parity(ctx, p):
        ctx.require_path(p)
        return IntV(int(open(p.value).read()) % 2)

    @reg.task("label")
    def label(ctx, p):
        return StrV("odd" if ctx.call("parity", p).value else "even")

    pie = Pie(Store(None), reg)
    run(pie, "label", PathV(src))
    write(src, "3")
    out, s = run(pie, "label", PathV(src))
    assert out == StrV("odd") and s.executions_of("parity") == 1 and s.executions_of("label") == 0


def test_fixed_bytes_generator_gives_early_cutoff(tmp):
    src, table = os.path.join(tmp, "syntax"), os.path.join(tmp, "table")
    write(src, "a")
    reg = TaskRegistry()

    @reg.task("gen")
    def gen(ctx, _):
        ctx.require_path(src)
        with open(table, "w") as fh:
            fh.write("fixed")
        ctx.generate_path(table)
        return UNIT

    @reg.task("parse")
    def parse(ctx, _):
        ctx.require_path(table, PathStamper.HASH)
        return StrV(open(table).read())

    @reg.task("main")
    def main(ctx, _):
        ctx.call("gen", UNIT)
        return ctx.call("parse", UNIT)

    pie = Pie(Store(None), reg)
    run(pie, "main", UNIT)
    bump_mtime(src)
    _, s = run(pie, "main", UNIT)
    assert s.executions_of("gen") == 1 and s.executions_of("parse") == 0


def test_deleted_output_is_regenerated(tmp):
    out_file = os.path.join(tmp, "out")
    reg = TaskRegistry()

    @reg.task("gen")
    def gen(ctx, _):
        with open(out_file, "w") as fh:
            fh.write("x")
        ctx.generate_path(out_file)
        return UNIT

    pie = Pie(Store(None), reg)
    run(pie, "gen", UNIT)
    os.remove(out_file)
    _, s = run(pie, "gen", UNIT)
    assert s.total_executions == 1 and os.path.exists(out_file)


def test_cycle_detection():
    reg = TaskRegistry()
    reg.register("a", lambda ctx, v: ctx.call("b", v))
    reg.register("b", lambda ctx, v: ctx.call("a", v))
    with pytest.raises(CycleDetected):
        run(Pie(Store(None), reg), "a", UNIT)


def test_unknown_task():
    with pytest.raises(UnknownTask):
        run(Pie(Store(None), TaskRegistry()), "missing", UNIT)


def test_failed_task_leaves_no_record_and_is_retried():
    reg = TaskRegistry()
    state = {"fail": True}

    @reg.task("flaky")
    def flaky(ctx, v):
        if state["fail"]:
            raise RuntimeError("boom")
        return v

    pie = Pie(Store(None), reg)
    with pytest.raises(TaskFailed):
        run(pie, "flaky", IntV(1))
    assert pie.store.get_task(TaskKey.of("flaky", IntV(1))) is None
    state["fail"] = False
    out, s = run(pie, "flaky", IntV(1))
    assert out == IntV(1) and s.total_executions == 1


def test_non_value_output_fails():
    reg = TaskRegistry()
    reg.register("bad", lambda ctx, v: 3)
    with pytest.raises(TaskFailed):
        run(Pie(Store(None), reg), "bad", UNIT)


def test_transient_output_contract(tmp):
    loc = os.path.join(tmp, "store")
    reg = TaskRegistry()
    reg.register("t", lambda ctx, v: Transient(IntV(42)))
    reg.register("user", lambda ctx, v: IntV(ctx.call("t", v).value + 1))

    with Store(loc) as store:
        pie = Pie(store, reg)
        assert run(pie, "user", UNIT)[0] == IntV(43)
        _, s = run(pie, "user", UNIT)
        assert s.total_executions == 0
    with Store(loc) as store:
        pie = Pie(store, reg)
        assert store.get_task(TaskKey.of("t", UNIT)).output.transient
        out, s = run(pie, "user", UNIT)
        assert out == IntV(43) and s.executions_of("t") == 1 and s.executions_of("user") == 0
        _, s = run(pie, "user", UNIT)
        assert s.total_executions == 0


def test_overlap_error_names_both_tasks(tmp):
    out = os.path.join(tmp, "out.txt")
    reg = TaskRegistry()

    def writer(ctx, v):
        with open(out, "w") as fh:
            fh.write(v.value)
        ctx.generate_path(out)
        return UNIT

    reg.register("w1", writer)
    reg.register("w2", writer)
    reg.register("main", lambda ctx, v: TupleV((ctx.call("w1", StrV("a")), ctx.call("w2", StrV("b")))))
    with pytest.raises(OverlapError) as exc:
        run(Pie(Store(None), reg), "main", UNIT)
    assert "w1" in str(exc.value) and "w2" in str(exc.value) and out in str(exc.value)


def test_same_task_may_regenerate_its_output(tmp):
    out = os.path.join(tmp, "o")
    src = os.path.join(tmp, "s")
    write(src, "1")
    reg = TaskRegistry()

    @reg.task("copy")
    def copy(ctx, _):
        ctx.require_path(src)
        with open(out, "w") as fh:
            fh.write(open(src).read())
        ctx.generate_path(out)
        return UNIT

    pie = Pie(Store(None), reg)
    run(pie, "copy", UNIT)
    write(src, "2")
    _, s = run(pie, "copy", UNIT)
    assert s.total_executions == 1


def test_hidden_dependency_error(tmp):
    p = os.path.join(tmp, "shared")
    write(p, "old")
    reg = TaskRegistry()

    @reg.task("reader")
    def reader(ctx, _):
        ctx.require_path(p)
        return StrV(open(p).read())

    @reg.task("writer")
    def writer(ctx, _):
        with open(p, "w") as fh:
            fh.write("new")
        ctx.generate_path(p)
        return UNIT

    reg.register("main", lambda ctx, v: TupleV((ctx.call("reader", UNIT), ctx.call("writer", UNIT))))
    with pytest.raises(HiddenDepError) as exc:
        run(Pie(Store(None), reg), "main", UNIT)
    assert "reader" in str(exc.value) and "writer" in str(exc.value)


def test_requiring_own_output_records_no_self_dependency(tmp):
    p = os.path.join(tmp, "x")
    reg = TaskRegistry()

    @reg.task("self")
    def self_task(ctx, _):
        with open(p, "w") as fh:
            fh.write("x")
        ctx.generate_path(p)
        ctx.require_path(p)
        return UNIT

    pie = Pie(Store(None), reg)
    run(pie, "self", UNIT)
    deps = pie.store.get_task(TaskKey.of("self", UNIT)).deps
    assert [type(d) for d in deps] == [GenerateDep, RequireDep]
    _, s = run(pie, "self", UNIT)
    assert s.total_executions == 0

import os
import re
import subprocess
import sys

import pytest

from helpers import bump_mtime, write
from pie.cli import CliConfig, UsageError, main
from pie.corpus import PROGRAMS, program_source
from pie.corpus.projects import make_benchmark_project, make_editor_project
from pie.store import open_store
from pie.corpus.foreign import TYPES


def pie(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def executed(out):
    return [int(n) for n in re.findall(r"^executed (\d+) task\(s\)$", out, re.M)]


@pytest.mark.parametrize("name", PROGRAMS)
def test_check_corpus(capsys, tmp, name):
    path = write(os.path.join(tmp, f"{name}.pie"), program_source(name))
    assert pie(capsys, "check", path)[0] == 0


def test_check_reports_location(capsys, tmp):
    path = write(os.path.join(tmp, "bad.pie"), "func f() -> int =\n  \"text\"\n")
    code, _, err = pie(capsys, "check", path)
    assert code == 2
    assert re.search(re.escape(path) + r":2:3: error: ", err)


def test_check_missing_file(capsys, tmp):
    code, _, err = pie(capsys, "check", os.path.join(tmp, "none.pie"))
    assert code == 2 and "cannot read" in err


def test_usage_errors(capsys, tmp):
    assert pie(capsys, "frobnicate")[0] == 2
    path = write(os.path.join(tmp, "p.pie"), "func f(x: int) -> int = x + 1")
    store = os.path.join(tmp, "s")
    assert pie(capsys, "run", "--store", store, path, "f")[0] == 2
    assert pie(capsys, "run", "--store", store, path, "g", "1")[0] == 2
    assert pie(capsys, "run", "--store", store, path, "f", "\"no\"")[0] == 2
    assert pie(capsys, "watch", "--interval", "5", "--store", store, path, "f", "1")[0] == 2
    with pytest.raises(UsageError):
        CliConfig(store, tmp, poll_interval_ms=9)


def test_run_output_and_reuse(capsys, tmp):
    path = write(os.path.join(tmp, "p.pie"), "func inc(x: int) -> int = x + 1\n"
                                            "func f(x: int) -> int* = [inc(x), inc(x + 1)]")
    store = os.path.join(tmp, "s")
    code, out, _ = pie(capsys, "run", "--store", store, path, "f", "1")
    assert code == 0 and out == "[2, 3]\nexecuted 3 task(s)\n"
    code, out, _ = pie(capsys, "run", "--store", store, path, "f", "1")
    assert out == "[2, 3]\nexecuted 0 task(s)\n"
    code, out, _ = pie(capsys, "run", "--store", store, path, "f", "2")
    assert out == "[3, 4]\nexecuted 2 task(s)\n"


def test_store_env_fallback(capsys, tmp, monkeypatch):
    path = write(os.path.join(tmp, "p.pie"), "func f() -> int = 1")
    monkeypatch.setenv("PIE_STORE", "custom/store")
    assert pie(capsys, "run", "--cwd", tmp, path, "f")[0] == 0
    assert os.path.isfile(os.path.join(tmp, "custom", "store"))
    monkeypatch.delenv("PIE_STORE")
    assert pie(capsys, "run", "--cwd", tmp, path, "f")[0] == 0
    assert os.path.isfile(os.path.join(tmp, ".pie", "store"))


def test_two_processes_share_the_store(tmp):
    program = make_editor_project(tmp)
    cmd = [sys.executable, "-m", "pie.cli", "run", "--plugin", "pie.corpus", "--cwd", tmp, program,
           "update-editor", "let x"]
    first = subprocess.run(cmd, capture_output=True, text=True)
    second = subprocess.run(cmd, capture_output=True, text=True)
    assert first.returncode == 0, first.stderr
    assert executed(first.stdout) == [9]
    assert executed(second.stdout) == [0]
    assert first.stdout.splitlines()[0] == second.stdout.splitlines()[0]


OVERLAP = """
func a() -> path = { write_file(./out.txt); generates ./out.txt; ./out.txt }
func b() -> path = { generates ./out.txt; ./out.txt }
func main() -> (path, path) = (a(), b())
func write_file(p: path) -> unit = foreign
"""


def _writer_plugin(fr):
    from pie.values import UNIT

    def write_file(ctx, p):
        with open(p.value, "w") as fh:
            fh.write("x")
        return UNIT
    fr.register("write_file", 1, write_file)


def test_overlap_fails_and_rolls_back(capsys, tmp, monkeypatch):
    mod = type(sys)("overlap_plugin")
    mod.pie_plugin = _writer_plugin
    monkeypatch.setitem(sys.modules, "overlap_plugin", mod)
    path = write(os.path.join(tmp, "o.pie"), OVERLAP)
    store = os.path.join(tmp, "s")
    code, out, err = pie(capsys, "run", "--plugin", "overlap_plugin", "--store", store, path, "main")
    assert code == 1 and out == ""
    assert "a(unit)" in err and "b(unit)" in err and os.path.join(tmp, "out.txt") in err
    with open_store(store) as s:
        assert list(s.keys()) == []


def test_clean(capsys, tmp):
    store = os.path.join(tmp, "s")
    assert pie(capsys, "clean", "--store", store)[0] == 0
    path = write(os.path.join(tmp, "p.pie"), "func g() -> int = 2\nfunc f() -> int = g()")
    pie(capsys, "run", "--store", store, path, "f")
    assert pie(capsys, "clean", "--store", store)[0] == 0
    assert pie(capsys, "clean", "--store", store)[0] == 0
    assert executed(pie(capsys, "run", "--store", store, path, "f")[1]) == [2]


def test_graph(capsys, tmp):
    store = os.path.join(tmp, "s")
    code, _, err = pie(capsys, "graph", "--store", store)
    assert code == 2 and "no store" in err
    program = make_editor_project(tmp)
    pie(capsys, "run", "--plugin", "pie.corpus", "--store", store, program, "update-editor", "let")
    code, out, _ = pie(capsys, "graph", "--plugin", "pie.corpus", "--store", store)
    assert code == 0 and out.startswith("digraph pie {")
    with open_store(store, {t.name: t for t in TYPES}) as s:
        n_tasks = len(list(s.keys()))
    task_nodes = [ln for ln in out.splitlines() if "shape=box" in ln]
    assert len(task_nodes) == n_tasks == 9


def test_watch_reruns_only_on_real_change(capsys, tmp):
    program = make_benchmark_project(tmp)
    store = os.path.join(tmp, "s")
    base = ["watch", "--plugin", "pie.corpus", "--store", store, "--cwd", tmp, "--interval", "10",
            "--iterations", "1", program, "main", '["-wi", "0"]']
    code, out, _ = pie(capsys, *base)
    assert code == 0 and executed(out) == [16]
    # the built jar is required by hash: an mtime bump alone changes nothing
    bump_mtime(os.path.join(tmp, "target", "benchmarks.jar"))
    assert executed(pie(capsys, *base)[1]) == [0]
    write(os.path.join(tmp, "lib", "dexx.jar"), "library dexx v2\n")
    assert executed(pie(capsys, *base)[1]) == [2]


def test_watch_continues_after_failure(capsys, tmp):
    path = write(os.path.join(tmp, "p.pie"), 'func f() -> string = { val s = read ./in.txt; if (s == "bad") fail "bad input"; s }')
    write(os.path.join(tmp, "in.txt"), "good")
    store = os.path.join(tmp, "s")
    base = ["watch", "--store", store, "--interval", "10", "--iterations", "2", path, "f"]
    assert executed(pie(capsys, *base)[1]) == [1]
    write(os.path.join(tmp, "in.txt"), "bad")
    code, out, err = pie(capsys, *base)
    assert code == 0 and err.count("bad input") == 1 and executed(out) == []
    write(os.path.join(tmp, "in.txt"), "fine")
    code, out, _ = pie(capsys, *base)
    assert out.startswith("fine\n") and executed(out) == [1]


def test_poll_detects_changes_and_skips_unchanged_failure(capsys, tmp):
    from pie.cli import Runner
    path = write(os.path.join(tmp, "p.pie"),
                 'func g() -> string = { val s = read ./in.txt; if (s == "bad") fail "bad input"; s }\n'
                 'func f() -> string = g()')
    write(os.path.join(tmp, "in.txt"), "good")
    runner = Runner(path, "f", [], CliConfig(os.path.join(tmp, "s"), tmp))
    try:
        assert runner.run_once() == 0
        assert runner.poll_once() is False
        write(os.path.join(tmp, "in.txt"), "bad")
        assert runner.poll_once() is True
        assert runner.poll_once() is False
        write(os.path.join(tmp, "in.txt"), "better")
        assert runner.poll_once() is True
        out = capsys.readouterr()
        assert out.err.count("bad input") == 1 and "better" in out.out
    finally:
        runner.close()

import hashlib
import os
import subprocess

import pytest

from pie.corpus import PROGRAMS, STUBS, install_stubs
from pie.corpus.foreign import extract_deps, jsgr_parse, keywords_of, table2object, tokenize
from pie.corpus.projects import SUBJECTS, make_benchmark_project, make_editor_project
from pie.runtime import Pie, TaskRegistry
from pie.store import Store
from pie.values import NULL, ListV, PathV, StrV


@pytest.fixture(scope="module")
def stubs(tmp_path_factory):
    return install_stubs(str(tmp_path_factory.mktemp("stubs")))


def _run(stubs, *argv, cwd=None):
    return subprocess.run([os.path.join(stubs, argv[0]), *argv[1:]], cwd=cwd, capture_output=True, text=True)


def _digest(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def test_install_is_idempotent(stubs):
    before = {n: os.stat(os.path.join(stubs, n)).st_mtime_ns for n in STUBS}
    assert install_stubs(stubs) == stubs
    assert {n: os.stat(os.path.join(stubs, n)).st_mtime_ns for n in STUBS} == before
    assert all(os.access(os.path.join(stubs, n), os.X_OK) for n in STUBS)
    assert set(PROGRAMS) == {"editor", "spoofax", "benchmark"}


def test_sdf2normalized_writes_norm_and_dep(stubs, tmp):
    make_editor_project(tmp)
    r = _run(stubs, "sdf2normalized", "lexical.sdf", "-Iinclude", "-olexical.norm", "-dlexical.dep", cwd=tmp)
    assert r.returncode == 0, r.stderr
    with open(os.path.join(tmp, "lexical.norm")) as fh:
        assert "-- from common.sdf" in fh.read()
    with open(os.path.join(tmp, "lexical.dep")) as fh:
        assert fh.read() == "include/common.sdf\n"


def test_sdf2normalized_unresolved_import_fails(stubs, tmp):
    make_editor_project(tmp)
    r = _run(stubs, "sdf2normalized", "lexical.sdf", "-olexical.norm", "-dlexical.dep", cwd=tmp)
    assert r.returncode == 1 and "cannot resolve import common" in r.stderr


def test_sdf2table_is_deterministic(stubs, tmp):
    with open(os.path.join(tmp, "a.norm"), "w") as fh:
        fh.write("normalized a\n")
    digests = []
    for _ in range(2):
        assert _run(stubs, "sdf2table", "a.norm", "-oparse.tbl", cwd=tmp).returncode == 0
        digests.append(_digest(os.path.join(tmp, "parse.tbl")))
    assert digests[0] == digests[1]


def test_mvn_stub_jar_tracks_sources(stubs, tmp):
    make_benchmark_project(tmp)
    jar = os.path.join(tmp, "target", "benchmarks.jar")
    assert _run(stubs, "mvn-stub", "verify", "-f", "pom.xml", cwd=tmp).returncode == 0
    first = _digest(jar)
    _run(stubs, "mvn-stub", "verify", "-f", "pom.xml", cwd=tmp)
    assert _digest(jar) == first
    with open(os.path.join(tmp, "src/main/resources/notes.md"), "a") as fh:
        fh.write("more\n")
    _run(stubs, "mvn-stub", "verify", "-f", "pom.xml", cwd=tmp)
    assert _digest(jar) == first
    with open(os.path.join(tmp, "src/main/scala/Adapter.scala"), "a") as fh:
        fh.write("// edit\n")
    _run(stubs, "mvn-stub", "verify", "-f", "pom.xml", cwd=tmp)
    assert _digest(jar) != first
    assert _run(stubs, "mvn-stub", "package", cwd=tmp).returncode == 2


def test_jmh_stub_writes_csv(stubs, tmp):
    make_benchmark_project(tmp)
    args = ["jmh-stub", "-jar", "lib/clojure.jar", "Set.*", "-p", "subject=VF_CLOJURE", "-wi", "0",
            "-rff", "results/set_clojure.csv"]
    assert _run(stubs, *args, cwd=tmp).returncode == 0
    csv = os.path.join(tmp, "results", "set_clojure.csv")
    first = _digest(csv)
    _run(stubs, *args, cwd=tmp)
    assert _digest(csv) == first
    with open(csv) as fh:
        assert fh.read().startswith("benchmark,subject,score\nSet.*,VF_CLOJURE,")
    assert len(SUBJECTS) == 7


def _ctx_call(fn, *args):
    reg = TaskRegistry()
    reg.register("t", lambda ctx, _: fn(ctx, *args))
    with Pie(Store(None), reg).session() as s:
        return s.call("t", NULL)


def test_extract_deps(tmp):
    with open(os.path.join(tmp, "x.dep"), "w") as fh:
        fh.write("include/a.sdf\n\ninclude/b.sdf\n")
    out = _ctx_call(extract_deps, PathV(os.path.join(tmp, "x.dep")))
    assert out == ListV((PathV(os.path.join(tmp, "include/a.sdf")), PathV(os.path.join(tmp, "include/b.sdf"))))


def test_parse_stub_reports_errors():
    table = table2object(None, StrV("keywords: let in"))
    ast, tokens, msgs = jsgr_parse(None, StrV("let <err> x"), StrV("Start"), table).elems
    assert ast == NULL and tokens == NULL and len(msgs.elems) == 1
    ast, tokens, msgs = jsgr_parse(None, StrV("let x"), StrV("Start"), table).elems
    assert [t.handle for t in tokens.elems] == [("keyword", "let"), ("identifier", "x")]
    assert msgs.elems == ()


def test_tokenizer():
    assert keywords_of("a\nkeywords: b a\nkeywords: c") == ("a", "b", "c")
    assert [k for k, _ in tokenize("if x1 = 42", ("if",))] == ["keyword", "identifier", "operator", "number"]

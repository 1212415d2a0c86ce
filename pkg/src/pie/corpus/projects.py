"""Scaffolding for small project trees the corpus programs run against."""

from __future__ import annotations

import os

from pie.corpus import program_source

SUBJECTS = ("clojure", "champ", "scala", "javaslang", "unclejim", "dexx", "pcollections")


def write(root: str, rel: str, text: str) -> str:
    path = os.path.join(root, rel)
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return path


def make_editor_project(root: str) -> str:
    """Two syntax modules sharing an include directory; returns the program path."""
    write(root, "lexical.sdf", "module lexical\nimports common\nkeywords: let in\n")
    write(root, "contextfree.sdf", "module contextfree\nimports common\nkeywords: if then else\n")
    write(root, "include/common.sdf", "module common\nkeywords: true false\n")
    write(root, "include/README.txt", "not a syntax module\n")
    return write(root, "editor.pie", program_source("editor"))


def make_spoofax_project(root: str) -> str:
    """A workspace with two language specifications and a project to walk."""
    write(root, "workspace.cfg", "# extension = language directory[:start symbol]\n"
                                 "calc = langs/calc\nsql = langs/sql:Query\n")
    write(root, "langs/calc/syntax.sdf", "module calc\nkeywords: let in\n")
    write(root, "langs/calc/styling.esv", "keyword = blue\nnumber = green\n")
    write(root, "langs/sql/syntax.sdf", "module sql\nkeywords: select from where\n")
    write(root, "langs/sql/styling.esv", "keyword = purple\nidentifier = black\n")
    write(root, "project/main.calc", "let x = 1 in x\n")
    write(root, "project/lib/util.calc", "let y = 2 in y\n")
    write(root, "project/query.sql", "select name from users\n")
    write(root, "project/notes.txt", "ignored by the walk\n")
    return write(root, "spoofax.pie", program_source("spoofax"))


def make_benchmark_project(root: str) -> str:
    """A benchmark tree with two benchmark classes and seven subject libraries."""
    pkg = "src/main/java/io/usethesource/criterion"
    write(root, "pom.xml", "<project><artifactId>criterion</artifactId></project>\n")
    write(root, f"{pkg}/JmhSetBenchmarks.java", "class JmhSetBenchmarks { /* set operations */ }\n")
    write(root, f"{pkg}/JmhMapBenchmarks.java", "class JmhMapBenchmarks { /* map operations */ }\n")
    write(root, f"{pkg}/Util.java", "class Util {}\n")
    write(root, "src/main/scala/Adapter.scala", "object Adapter\n")
    write(root, "src/main/resources/notes.md", "not a source file\n")
    for name in SUBJECTS:
        write(root, f"lib/{name}.jar", f"library {name} v1\n")
    return write(root, "benchmark.pie", program_source("benchmark"))

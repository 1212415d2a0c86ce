"""The three-task parsing pipeline written against the host API.

``update-editor(text)`` requires ``generate-table(syntax)`` and then
``parse((table, text))``. The table file is generated by one task and read
by another, so the runtime infers the hidden dependency between them.
"""

from __future__ import annotations

import hashlib
import os

from pie.corpus.foreign import keywords_of, tokenize
from pie.runtime import ExecContext, TaskRegistry
from pie.stampers import PathStamper
from pie.values import ListV, PathV, StrV, TupleV


def table_text(syntax: str) -> str:
    digest = hashlib.sha256(syntax.encode("utf-8")).hexdigest()[:16]
    keywords = " ".join(keywords_of(syntax))
    return f"parse-table {digest}\nkeywords: {keywords}\n"


def register_editor_tasks(reg: TaskRegistry, root: str,
                          table_stamper: PathStamper = PathStamper.MODIFIED) -> None:
    syntax_file = PathV(os.path.join(os.path.abspath(root), "syntax.sdf3"))

    @reg.task("generate-table")
    def generate_table(ctx: ExecContext, syntax: PathV) -> PathV:
        ctx.require_path(syntax)
        with open(syntax.value, encoding="utf-8") as fh:
            text = table_text(fh.read())
        table = PathV(os.path.join(os.path.dirname(syntax.value), "parse.tbl"))
        with open(table.value, "w", encoding="utf-8") as fh:
            fh.write(text)
        ctx.generate_path(table)
        return table

    @reg.task("parse")
    def parse(ctx: ExecContext, input: TupleV) -> TupleV:
        table, text = input.elems
        ctx.require_path(table, table_stamper)
        with open(table.value, encoding="utf-8") as fh:
            keywords = tuple(keywords_of(fh.read()))
        tokens = tokenize(text.value, keywords)
        return TupleV((
            ListV(tuple(StrV(f"{kind}:{word}") for kind, word in tokens)),
            ListV(tuple(StrV("syntax error") for _, word in tokens if word == "<err>")),
        ))

    @reg.task("update-editor")
    def update_editor(ctx: ExecContext, text: StrV) -> TupleV:
        table = ctx.call("generate-table", syntax_file)
        return ctx.call("parse", TupleV((table, text)))

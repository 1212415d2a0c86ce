"""Deterministic stand-ins for the language tooling the corpus programs call.

Parsing here is a whitespace tokenizer: a parse fails iff the text contains
``<err>``, and a token is a keyword iff the parse table lists it. That is
enough structure for styling and messages to react to syntax changes.
"""

from __future__ import annotations

import hashlib
import json
import posixpath
import re
from typing import Any

from pie.errors import TaskFailed
from pie.runtime import ExecContext
from pie.stampers import PathStamper
from pie.values import NULL, ForeignType, ForeignV, ListV, PathV, StrV, Transient, TupleV

ERROR_MARKER = "<err>"
_TOKEN = re.compile(r"<err>|[A-Za-z_][A-Za-z0-9_]*|\d+|\S")


def _tuplify(obj: Any) -> Any:
    if isinstance(obj, list):
        return tuple(_tuplify(o) for o in obj)
    return obj


def json_type(name: str, display=None, methods=None) -> ForeignType:
    """Foreign type whose handles are nested tuples of JSON scalars."""
    return ForeignType(
        name,
        to_bytes=lambda h: json.dumps(h, separators=(",", ":"), sort_keys=True).encode("utf-8"),
        from_bytes=lambda raw: _tuplify(json.loads(raw.decode("utf-8"))),
        display=display or (lambda h: f"{name}{h!r}"),
        methods=methods or {},
    )


def _read(ctx: ExecContext, p: PathV) -> str:
    ctx.require_path(p, PathStamper.HASH)
    try:
        with open(p.value, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise TaskFailed(f"cannot read {p.value}: {exc}") from exc


def keywords_of(text: str) -> tuple[str, ...]:
    words: set[str] = set()
    for line in text.splitlines():
        line = line.strip()
        if line.startswith("keywords:"):
            words.update(line[len("keywords:"):].split())
    return tuple(sorted(words))


def _table_handle(text: str) -> tuple:
    return (hashlib.sha256(text.encode("utf-8")).hexdigest()[:16], keywords_of(text))


def tokenize(text: str, keywords: tuple[str, ...]) -> list[tuple[str, str]]:
    out = []
    for word in _TOKEN.findall(text):
        if word in keywords:
            kind = "keyword"
        elif word[0].isalpha() or word[0] == "_":
            kind = "identifier"
        elif word.isdigit():
            kind = "number"
        else:
            kind = "operator"
        out.append((kind, word))
    return out


def _messages(text: str) -> list[tuple[str, str]]:
    pos = text.find(ERROR_MARKER)
    if pos < 0:
        return []
    line = text.count("\n", 0, pos) + 1
    return [("error", f"syntax error at line {line}")]


# -- types ---------------------------------------------------------------------

AST = json_type("Ast", lambda h: f"Ast({h[0]}, {len(h[1])} nodes)")
TOKEN = json_type("Token", lambda h: f"{h[0]}:{h[1]}")
MSG = json_type("Msg", lambda h: f"{h[0]}: {h[1]}")
PARSE_TABLE = json_type("ParseTable", lambda h: f"ParseTable#{h[0]}")
STYLING = json_type("Styling", lambda h: "Styling(" + " ".join(f"{t}={c}" for t, c in h) + ")")
SYNTAX_STYLER = json_type("SyntaxStyler", lambda h: f"SyntaxStyler({len(h)} rules)")


def _langspec_syntax(ctx, spec: ForeignV) -> PathV:
    return PathV(posixpath.join(spec.handle[1], "syntax.sdf"))


def _langspec_styling(ctx, spec: ForeignV) -> PathV:
    return PathV(posixpath.join(spec.handle[1], "styling.esv"))


def _langspec_start(ctx, spec: ForeignV) -> StrV:
    return StrV(spec.handle[2])


LANG_SPEC = json_type(
    "LangSpec",
    lambda h: f"LangSpec({h[0]})",
    {"syntax": _langspec_syntax, "styling": _langspec_styling, "startSymbol": _langspec_start},
)


def _ws_extensions(ctx, ws: ForeignV) -> ListV:
    return ListV(tuple(StrV(ext) for ext, _, _ in ws.handle[1]))


def _ws_langspec(ctx, ws: ForeignV, file: PathV) -> ForeignV:
    _, dot, ext = file.name.rpartition(".")
    for spec in ws.handle[1]:
        if dot and spec[0] == ext:
            return ForeignV(LANG_SPEC, spec)
    raise TaskFailed(f"no language specification for {file.value}")


WORKSPACE = json_type(
    "Workspace",
    lambda h: f"Workspace({', '.join(s[0] for s in h[1])})",
    {"extensions": _ws_extensions, "langSpec": _ws_langspec},
)

TYPES = (AST, TOKEN, MSG, PARSE_TABLE, STYLING, SYNTAX_STYLER, LANG_SPEC, WORKSPACE)


# -- functions -------------------------------------------------------------------


def extract_deps(ctx: ExecContext, dep_file: PathV) -> ListV:
    """Paths listed one per line in a ``.dep`` file, relative to that file."""
    base = posixpath.dirname(dep_file.value)
    lines = [ln.strip() for ln in _read(ctx, dep_file).splitlines()]
    return ListV(tuple(PathV(posixpath.join(base, ln)) for ln in lines if ln))


def table2object(ctx: ExecContext, text: StrV) -> ForeignV:
    return ForeignV(PARSE_TABLE, _table_handle(text.value))


def _parse(text: str, start: str, table: ForeignV):
    tokens = tokenize(text, table.handle[1])
    msgs = _messages(text)
    ast = (start, tuple(w for _, w in tokens if w != ERROR_MARKER))
    return ast, tokens, msgs


def parse_fixed(ctx: ExecContext, text: StrV, table: ForeignV) -> TupleV:
    """Non-optional parse used by the editor pipeline; errors become messages."""
    ast, tokens, msgs = _parse(text.value, "Start", table)
    if msgs:
        ast = ("error", ())
    return TupleV((
        ForeignV(AST, ast),
        ListV(tuple(ForeignV(TOKEN, t) for t in tokens)),
        ListV(tuple(ForeignV(MSG, m) for m in msgs)),
    ))


COLORS = {"keyword": "blue", "identifier": "black", "number": "green", "operator": "gray"}


def style_tokens(ctx: ExecContext, tokens: ListV) -> ForeignV:
    return ForeignV(STYLING, tuple((t.handle[1], COLORS.get(t.handle[0], "black")) for t in tokens.elems))


def create_workspace(ctx: ExecContext, text: StrV, root: PathV) -> ForeignV:
    """Parse ``ext=langspec-dir[:StartSymbol]`` lines into a workspace."""
    specs = []
    for raw in text.value.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        ext, sep, rest = line.partition("=")
        if not sep:
            raise TaskFailed(f"bad workspace line {raw!r}")
        directory, _, start = rest.strip().partition(":")
        spec_dir = PathV(posixpath.join(root.value, directory.strip())).value
        specs.append((ext.strip(), spec_dir, start.strip() or "Start"))
    return ForeignV(WORKSPACE, (root.value, tuple(specs)))


def sdf2table_object(ctx: ExecContext, syntax: PathV) -> Transient:
    """Parse table for one syntax file, kept in memory only."""
    return Transient(ForeignV(PARSE_TABLE, _table_handle(_read(ctx, syntax))))


def jsgr_parse(ctx: ExecContext, text: StrV, start: StrV, table: ForeignV) -> TupleV:
    ast, tokens, msgs = _parse(text.value, start.value, table)
    msg_list = ListV(tuple(ForeignV(MSG, m) for m in msgs))
    if msgs:
        return TupleV((NULL, NULL, msg_list))
    return TupleV((ForeignV(AST, ast), ListV(tuple(ForeignV(TOKEN, t) for t in tokens)), msg_list))


def esv2styler(ctx: ExecContext, esv: PathV) -> ForeignV:
    """Styler rules from ``kind = color`` lines."""
    rules = []
    for raw in _read(ctx, esv).splitlines():
        kind, sep, color = raw.partition("=")
        if sep and kind.strip():
            rules.append((kind.strip(), color.strip()))
    return ForeignV(SYNTAX_STYLER, tuple(sorted(rules)))


def esv_style(ctx: ExecContext, tokens: ListV, styler: ForeignV) -> ForeignV:
    rules = dict(styler.handle)
    return ForeignV(STYLING, tuple((t.handle[1], rules.get(t.handle[0], "default")) for t in tokens.elems))


FUNCTIONS = {
    # editor pipeline
    "extract-deps": (1, extract_deps),
    "table2object": (1, table2object),
    "parse": (2, parse_fixed),
    "style": (1, style_tokens),
    # multi-language pipeline
    "createWorkspace": (2, create_workspace),
    "sdf2table": (1, sdf2table_object),
    "jsgrParse": (3, jsgr_parse),
    "esv2styler": (1, esv2styler),
    "esvStyle": (2, esv_style),
}


def register_foreign_stubs(fr) -> None:
    """Register every stub function and data type the corpus programs bind to."""
    for name, (arity, fn) in FUNCTIONS.items():
        fr.register(name, arity, fn)
    for t in TYPES:
        fr.register_data(t.name, t)


__all__ = ["ERROR_MARKER", "FUNCTIONS", "TYPES", "register_foreign_stubs", "tokenize", "keywords_of"]

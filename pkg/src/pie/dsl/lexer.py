"""Tokenizer for PIE programs.

String and path literals are lexed into structured tokens whose payload is a
list of text segments and nested token lists (for ``${...}`` interpolations),
so the parser never re-scans literal text.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from pie.dsl.ast import Span
from pie.dsl.diagnostics import Diagnostic, DiagnosticError

KEYWORDS = frozenset({
    "func", "data", "foreign", "if", "else", "val", "requires", "generates", "exists",
    "read", "list", "walk", "return", "fail", "unit", "true", "false", "null", "with",
    "by", "bool", "int", "string", "path",
})

# longest first so that two-character operators win
OPERATORS = ("==", "!=", "||", "&&", "->", "<-", "{", "}", "(", ")", "[", "]", ",", ";",
             ":", "=", "!", "+", ".", "#", "|", "?", "*")

PATH_STOP = frozenset("\n\r\t ,;}])$")


def is_id_start(ch: str) -> bool:
    return ch.isascii() and ch.isalpha()


def is_id_char(ch: str) -> bool:
    return ch.isascii() and (ch.isalnum() or ch in "_-")


@dataclass
class Interp:
    """An interpolated ``$id`` or ``${...}`` inside a literal."""

    tokens: list["Token"]
    braced: bool
    span: Span


@dataclass
class Token:
    kind: str  # id | kw | op | int | str | path | eof
    text: str
    span: Span
    parts: list[Union[str, Interp]] = field(default_factory=list)
    closes_condition: bool = False  # ')' ending an if condition; a value may follow

    def is_op(self, *ops: str) -> bool:
        return self.kind == "op" and self.text in ops

    def is_kw(self, *kws: str) -> bool:
        return self.kind == "kw" and self.text in kws


class Lexer:
    def __init__(self, source: str, origin: str = "<input>"):
        self.src = source
        self.origin = origin
        self.pos = 0

    def error(self, msg: str, start: int, end: int | None = None):
        end = start + 1 if end is None else end
        raise DiagnosticError([Diagnostic(self.origin, Span(start, min(end, max(len(self.src), start))), msg)],
                              self.src)

    def tokens(self) -> list[Token]:
        out = self._until(None)
        out.append(Token("eof", "", Span(len(self.src), len(self.src))))
        return out

    def _skip_trivia(self) -> None:
        src = self.src
        while self.pos < len(src):
            ch = src[self.pos]
            if ch in " \t\r\n":
                self.pos += 1
            elif src.startswith("//", self.pos):
                nl = src.find("\n", self.pos)
                self.pos = len(src) if nl < 0 else nl + 1
            else:
                break

    def _until(self, closer: str | None) -> list[Token]:
        """Lex tokens up to EOF, or up to an unbalanced ``closer`` brace."""
        out: list[Token] = []
        depth = 0
        conditions: list[bool] = []  # per open '(': does it start an if condition
        src = self.src
        while True:
            self._skip_trivia()
            if self.pos >= len(src):
                return out
            ch = src[self.pos]
            if closer is not None and ch == "}" and depth == 0:
                return out
            start = self.pos
            if ch == '"':
                out.append(self._string())
            elif (ch == "/" or src.startswith("./", self.pos)) and self._path_allowed(out):
                out.append(self._path())
            elif ch.isdigit() or (ch == "-" and self.pos + 1 < len(src) and src[self.pos + 1].isdigit()):
                self.pos += 1
                while self.pos < len(src) and src[self.pos].isdigit():
                    self.pos += 1
                if self.pos < len(src) and is_id_char(src[self.pos]) and src[self.pos] != "-":
                    self.error("malformed number", start, self.pos + 1)
                out.append(Token("int", src[start:self.pos], Span(start, self.pos)))
            elif is_id_start(ch):
                self.pos += 1
                while self.pos < len(src) and is_id_char(src[self.pos]):
                    self.pos += 1
                text = src[start:self.pos]
                out.append(Token("kw" if text in KEYWORDS else "id", text, Span(start, self.pos)))
            else:
                for op in OPERATORS:
                    if src.startswith(op, self.pos):
                        self.pos += len(op)
                        if op == "{":
                            depth += 1
                        elif op == "}":
                            depth -= 1
                        tok = Token("op", op, Span(start, self.pos))
                        if op == "(":
                            conditions.append(bool(out) and out[-1].is_kw("if"))
                        elif op == ")" and conditions:
                            tok.closes_condition = conditions.pop()
                        out.append(tok)
                        break
                else:
                    self.error(f"unexpected character {ch!r}", start)

    @staticmethod
    def _path_allowed(prev: list[Token]) -> bool:
        # after a value-like token, '.' is a method call and '/' is never valid anyway
        if not prev:
            return True
        last = prev[-1]
        if last.kind == "id" and len(prev) > 1 and prev[-2].is_kw("with"):
            return True  # filter kind, e.g. `with pattern ./x`
        if last.kind in ("id", "int", "str", "path"):
            return False
        if last.kind == "kw" and last.text in ("unit", "true", "false", "null"):
            return False
        if last.is_op(")"):
            return last.closes_condition
        return not last.is_op("]")

    def _interp(self, parts: list, buf: list[str]) -> None:
        src = self.src
        start = self.pos
        self.pos += 1  # '$'
        if self.pos < len(src) and src[self.pos] == "{":
            self.pos += 1
            toks = self._until("}")
            if self.pos >= len(src):
                self.error("unterminated interpolation", start, self.pos)
            self.pos += 1
            if not toks:
                self.error("empty interpolation", start, self.pos)
            braced = True
        elif self.pos < len(src) and is_id_start(src[self.pos]):
            s = self.pos
            while self.pos < len(src) and is_id_char(src[self.pos]):
                self.pos += 1
            text = src[s:self.pos]
            toks = [Token("kw" if text in KEYWORDS else "id", text, Span(s, self.pos))]
            braced = False
        else:
            self.error("'$' must be followed by an identifier or '{'", start)
        if buf:
            parts.append("".join(buf))
            buf.clear()
        span = Span(start, self.pos)
        toks.append(Token("eof", "", Span(self.pos, self.pos)))
        parts.append(Interp(toks, braced, span))

    def _string(self) -> Token:
        src = self.src
        start = self.pos
        self.pos += 1
        parts: list = []
        buf: list[str] = []
        escapes = {"n": "\n", "t": "\t", "r": "\r", '"': '"', "\\": "\\", "$": "$", "0": "\0"}
        while True:
            if self.pos >= len(src) or src[self.pos] == "\n":
                self.error("unterminated string literal", start, self.pos)
            ch = src[self.pos]
            if ch == '"':
                self.pos += 1
                break
            if ch == "\\":
                nxt = src[self.pos + 1] if self.pos + 1 < len(src) else ""
                if nxt not in escapes:
                    self.error(f"unknown escape '\\{nxt}'", self.pos, self.pos + 2)
                buf.append(escapes[nxt])
                self.pos += 2
            elif ch == "$":
                self._interp(parts, buf)
            else:
                buf.append(ch)
                self.pos += 1
        if buf or not parts:
            parts.append("".join(buf))
        return Token("str", src[start:self.pos], Span(start, self.pos), parts)

    def _path(self) -> Token:
        src = self.src
        start = self.pos
        parts: list = []
        buf: list[str] = []
        while self.pos < len(src):
            ch = src[self.pos]
            if ch == "\\" and self.pos + 1 < len(src) and src[self.pos + 1] not in "\n\r":
                buf.append(src[self.pos + 1])
                self.pos += 2
            elif ch == "$":
                self._interp(parts, buf)
            elif ch in PATH_STOP:
                break
            else:
                buf.append(ch)
                self.pos += 1
        if buf or not parts:
            parts.append("".join(buf))
        return Token("path", src[start:self.pos], Span(start, self.pos), parts)


def tokenize(source: str, origin: str = "<input>") -> list[Token]:
    return Lexer(source, origin).tokens()

"""Change detection: path stamps, output stamps and directory filters."""

from __future__ import annotations

import enum
import hashlib
import os
import posixpath
import re
import stat
from dataclasses import dataclass
from functools import cached_property
from typing import Union

from pie.errors import InvalidPattern
from pie.values import ForeignV, ListV, PathV, Transient, TupleV, Value, encode

HASH_ALGORITHM = "sha256"


def _hasher():
    return hashlib.new(HASH_ALGORITHM)


class PathStamper(str, enum.Enum):
    EXISTS = "exists"
    MODIFIED = "modified"
    HASH = "hash"


class OutputStamper(str, enum.Enum):
    EQUALS = "equals"
    HASH = "hash"


class FilterKind(str, enum.Enum):
    REGEX = "regex"
    PATTERN = "pattern"
    EXTENSION = "extension"


def ant_to_regex(pattern: str) -> str:
    """Translate an ANT-style glob (``*``, ``?``, ``**``) into an anchored regex."""
    if pattern.endswith("/"):
        pattern += "**"
    segments: list[str] = []
    for seg in pattern.split("/"):
        if not (seg == "**" and segments and segments[-1] == "**"):
            segments.append(seg)  # "**/**" means the same as "**"
    out = []
    for i, seg in enumerate(segments):
        last = i == len(segments) - 1
        if seg == "**":
            if not last:
                out.append("(?:[^/]*/)*")
            elif out and out[-1].endswith("/"):
                # trailing ** also matches zero segments: "src/**" accepts "src"
                out[-1] = out[-1][:-1]
                out.append("(?:/.*)?")
            else:
                out.append(".*")
            continue
        buf = []
        for ch in seg:
            if ch == "*":
                buf.append("[^/]*")
            elif ch == "?":
                buf.append("[^/]")
            else:
                buf.append(re.escape(ch))
        out.append("".join(buf) + ("" if last else "/"))
    return "".join(out)


@dataclass(frozen=True)
class Filter:
    """Predicate over directory entries.

    ``dirs`` makes every directory pass regardless of the predicate (used by
    ``walk`` so that new subdirectories are noticed). ``base`` is prepended to
    entry names before pattern matching, so an ANT pattern written relative to
    a walk root still applies in nested directories.
    """

    kind: FilterKind
    args: tuple[str, ...]
    dirs: bool = False
    base: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", FilterKind(self.kind))
        object.__setattr__(self, "args", tuple(self.args))
        if not self.args:
            raise InvalidPattern(f"{self.kind.value} filter needs at least one argument")
        if self.kind is FilterKind.EXTENSION:
            for ext in self.args:
                if not ext or ext.startswith("."):
                    raise InvalidPattern(f"bad extension {ext!r}")
        else:
            self._compiled  # noqa: B018 - validate eagerly

    @cached_property
    def _compiled(self) -> tuple[re.Pattern, ...]:
        try:
            if self.kind is FilterKind.REGEX:
                return tuple(re.compile(a) for a in self.args)
            if self.kind is FilterKind.PATTERN:
                return tuple(re.compile(ant_to_regex(a)) for a in self.args)
        except re.error as exc:
            raise InvalidPattern(str(exc)) from exc
        return ()

    def accepts(self, rel: str, is_dir: bool = False) -> bool:
        if self.dirs and is_dir:
            return True
        rel = posixpath.join(self.base, rel) if self.base else rel
        name = posixpath.basename(rel)
        if self.kind is FilterKind.EXTENSION:
            _, dot, ext = name.rpartition(".")
            return bool(dot) and ext in self.args
        if self.kind is FilterKind.REGEX:
            return any(r.fullmatch(name) for r in self._compiled)
        return any(r.fullmatch(rel) for r in self._compiled)

    def nested(self, subdir: str) -> "Filter":
        return Filter(self.kind, self.args, self.dirs, posixpath.join(self.base, subdir) if self.base else subdir)


def filter_accepts(f: Filter, p: str | PathV, is_dir: bool = False) -> bool:
    """True if ``p`` (a path relative to the filtered root) passes ``f``."""
    return f.accepts(p.value if isinstance(p, PathV) else p, is_dir)


Payload = Union[bool, int, bytes, None]


@dataclass(frozen=True)
class Stamp:
    """Fingerprint produced by one stamper; ``payload`` None means absent."""

    kind: str
    payload: Payload

    def __repr__(self) -> str:
        p = self.payload.hex()[:16] if isinstance(self.payload, bytes) else self.payload
        return f"Stamp({self.kind}, {p})"


def _text(p: str | PathV) -> str:
    return p.value if isinstance(p, PathV) else p


def list_entries(directory: str | PathV, f: Filter | None = None) -> list[tuple[str, bool]]:
    """Immediate entries of ``directory`` passing ``f`` as sorted (name, is_dir) pairs."""
    out = []
    with os.scandir(_text(directory)) as it:
        for entry in it:
            try:
                is_dir = entry.is_dir()
            except OSError:
                is_dir = False
            if f is None or f.accepts(entry.name, is_dir):
                out.append((entry.name, is_dir))
    out.sort()
    return out


def _file_digest(path: str) -> bytes:
    h = _hasher()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.digest()


def stamp_path(p: str | PathV, kind: PathStamper, f: Filter | None = None) -> Stamp:
    path = _text(p)
    kind = PathStamper(kind)
    if kind is PathStamper.EXISTS:
        return Stamp(kind.value, os.path.exists(path))
    try:
        st = os.stat(path)
    except FileNotFoundError:
        return Stamp(kind.value, None)
    is_dir = stat.S_ISDIR(st.st_mode)
    if kind is PathStamper.MODIFIED:
        if not is_dir:
            return Stamp(kind.value, st.st_mtime_ns)
        if f is None:
            newest = st.st_mtime_ns
            for name, _ in list_entries(path):
                try:
                    newest = max(newest, os.stat(os.path.join(path, name)).st_mtime_ns)
                except FileNotFoundError:
                    continue
            return Stamp(kind.value, newest)
        # filtered: the directory's own mtime would also move for rejected entries
        h = _hasher()
        for name, sub in list_entries(path, f):
            h.update(name.encode("utf-8") + b"\0")
            if sub:
                h.update(b"d\n")
            else:
                h.update(b"f%d\n" % os.stat(os.path.join(path, name)).st_mtime_ns)
        return Stamp(kind.value, h.digest())
    if not is_dir:
        return Stamp(kind.value, _file_digest(path))
    h = _hasher()
    for name, sub in list_entries(path, f):
        h.update(name.encode("utf-8") + b"\0")
        h.update(b"d" if sub else _file_digest(os.path.join(path, name)))
    return Stamp(kind.value, h.digest())


def _value_digest(v: Value, h) -> None:
    # like the canonical encoding, but opaque foreign values contribute their hash64
    if isinstance(v, ForeignV) and not v.serializable:
        name = v.type_name.encode("utf-8")
        h.update(b"\x08%d:" % len(name) + name + v.hash64.to_bytes(8, "little"))
    elif isinstance(v, (ListV, TupleV)):
        h.update(bytes([v.tag]) + len(v.elems).to_bytes(4, "little"))
        for e in v.elems:
            _value_digest(e, h)
    else:
        h.update(encode(v))


def stamp_output(v: Value | Transient, kind: OutputStamper) -> Stamp:
    if isinstance(v, Transient):
        # a transient output is stamped by digest so a caller still notices when
        # the recomputed value differs from the one it consumed
        h = _hasher()
        _value_digest(v.value, h)
        return Stamp("transient", h.digest())
    kind = OutputStamper(kind)
    raw = encode(v)
    if kind is OutputStamper.EQUALS:
        return Stamp("equals", raw)
    h = _hasher()
    h.update(raw)
    return Stamp("hash-output", h.digest())

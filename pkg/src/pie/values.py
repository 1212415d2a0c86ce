"""Runtime values, structural equality, display text and canonical bytes.

Every value is an immutable dataclass. The canonical encoding is a tag byte
followed by a payload; it is deterministic and injective over serializable
values, so it doubles as the identity of task inputs and as the persisted
form of task outputs.
"""

from __future__ import annotations

import hashlib
import posixpath
import struct
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping

from pie.errors import DecodeError, IntOverflow, NonSerializable

INT_MIN = -(2**63)
INT_MAX = 2**63 - 1

TAG_UNIT = 0
TAG_BOOL = 1
TAG_INT = 2
TAG_STR = 3
TAG_PATH = 4
TAG_NULL = 5
TAG_LIST = 6
TAG_TUPLE = 7
TAG_FOREIGN = 8


def normalize_path(text: str) -> str:
    """Resolve ``.``/``..`` segments and duplicate or trailing separators.

    A leading ``./`` is kept as written so that relative paths display the way
    they were spelled; the result is a fixed point of this function.
    """
    if not text:
        return "."
    keep_dot = text.startswith("./")
    norm = posixpath.normpath(text)
    if norm.startswith("//"):
        norm = "/" + norm.lstrip("/")
    if keep_dot and norm not in (".",) and not norm.startswith(("..", "/")):
        norm = "./" + norm
    return norm


class Value:
    """Base of the value universe; see the concrete classes below."""

    __slots__ = ()
    tag: int = -1


@dataclass(frozen=True)
class UnitV(Value):
    tag = TAG_UNIT

    def __repr__(self) -> str:
        return "UNIT"


@dataclass(frozen=True)
class NullV(Value):
    tag = TAG_NULL

    def __repr__(self) -> str:
        return "NULL"


UNIT = UnitV()
NULL = NullV()


@dataclass(frozen=True)
class BoolV(Value):
    value: bool
    tag = TAG_BOOL


TRUE = BoolV(True)
FALSE = BoolV(False)


@dataclass(frozen=True)
class IntV(Value):
    value: int
    tag = TAG_INT

    def __post_init__(self):
        if isinstance(self.value, bool) or not isinstance(self.value, int):
            raise TypeError(f"IntV needs an int, got {self.value!r}")
        if not INT_MIN <= self.value <= INT_MAX:
            raise IntOverflow(f"integer {self.value} does not fit in 64 bits")


@dataclass(frozen=True)
class StrV(Value):
    value: str
    tag = TAG_STR


@dataclass(frozen=True)
class PathV(Value):
    value: str
    tag = TAG_PATH

    def __post_init__(self):
        object.__setattr__(self, "value", normalize_path(self.value))

    @property
    def name(self) -> str:
        return posixpath.basename(self.value)

    def join(self, *parts: str) -> "PathV":
        return PathV(posixpath.join(self.value, *parts))


@dataclass(frozen=True)
class ListV(Value):
    elems: tuple = ()
    tag = TAG_LIST

    def __post_init__(self):
        elems = tuple(self.elems)
        object.__setattr__(self, "elems", elems)
        tags = {e.tag for e in elems if e.tag != TAG_NULL}
        if len(tags) > 1:
            raise TypeError(f"list elements must share one type, got tags {sorted(tags)}")

    def __iter__(self):
        return iter(self.elems)

    def __len__(self) -> int:
        return len(self.elems)


@dataclass(frozen=True)
class TupleV(Value):
    elems: tuple
    tag = TAG_TUPLE

    def __post_init__(self):
        elems = tuple(self.elems)
        object.__setattr__(self, "elems", elems)
        if len(elems) < 2:
            raise TypeError("tuples have at least two elements")

    def __iter__(self):
        return iter(self.elems)

    def __len__(self) -> int:
        return len(self.elems)


def _default_display(handle: Any) -> str:
    return str(handle)


@dataclass(frozen=True)
class ForeignType:
    """Host descriptor for a foreign data type.

    ``to_bytes`` of ``None`` marks the type as non-serializable: its values may
    be task outputs (wrapped as transient) but never task inputs.
    """

    name: str
    to_bytes: Callable[[Any], bytes] | None = None
    from_bytes: Callable[[bytes], Any] | None = None
    display: Callable[[Any], str] = _default_display
    equals: Callable[[Any, Any], bool] = lambda a, b: a == b
    digest: Callable[[Any], int] | None = None
    methods: Mapping[str, Callable] = field(default_factory=dict)

    @property
    def serializable(self) -> bool:
        return self.to_bytes is not None


def opaque_type(name: str) -> ForeignType:
    """Stand-in descriptor for a foreign type decoded without its host descriptor."""
    return ForeignType(
        name,
        to_bytes=bytes,
        from_bytes=bytes,
        display=lambda h: f"<{name}#{hashlib.blake2b(h, digest_size=4).hexdigest()}>",
    )


@dataclass(frozen=True, eq=False)
class ForeignV(Value):
    ftype: ForeignType
    handle: Any
    tag = TAG_FOREIGN

    @property
    def type_name(self) -> str:
        return self.ftype.name

    @property
    def serializable(self) -> bool:
        return self.ftype.serializable

    def canonical_bytes(self) -> bytes:
        if self.ftype.to_bytes is None:
            raise NonSerializable(self.type_name)
        return self.ftype.to_bytes(self.handle)

    @property
    def hash64(self) -> int:
        if self.ftype.digest is not None:
            return self.ftype.digest(self.handle) & 0xFFFFFFFFFFFFFFFF
        if not self.serializable:
            return id(self.handle) & 0xFFFFFFFFFFFFFFFF
        raw = hashlib.blake2b(self.canonical_bytes(), digest_size=8).digest()
        return int.from_bytes(raw, "little")

    def __eq__(self, other):
        if not isinstance(other, ForeignV) or other.type_name != self.type_name:
            return False
        if other.ftype is self.ftype or other.ftype == self.ftype:
            return bool(self.ftype.equals(self.handle, other.handle))
        # one side came back from the store without its host descriptor
        if self.serializable and other.serializable:
            return self.canonical_bytes() == other.canonical_bytes()
        return self.handle is other.handle

    def __hash__(self):
        return hash((self.type_name, self.hash64))

    def __repr__(self) -> str:
        return f"ForeignV({self.type_name}, {self.handle!r})"


def equals(a: Value, b: Value) -> bool:
    """Structural equality; values with different type tags are never equal."""
    return a.tag == b.tag and a == b


# -- canonical encoding ------------------------------------------------------

_I64 = struct.Struct("<q")
_U32 = struct.Struct("<I")


def _encode_into(v: Value, out: bytearray) -> None:
    out.append(v.tag)
    if isinstance(v, (UnitV, NullV)):
        return
    if isinstance(v, BoolV):
        out.append(1 if v.value else 0)
    elif isinstance(v, IntV):
        out += _I64.pack(v.value)
    elif isinstance(v, (StrV, PathV)):
        raw = v.value.encode("utf-8")
        out += _U32.pack(len(raw))
        out += raw
    elif isinstance(v, (ListV, TupleV)):
        out += _U32.pack(len(v.elems))
        for e in v.elems:
            _encode_into(e, out)
    elif isinstance(v, ForeignV):
        name = v.type_name.encode("utf-8")
        payload = v.canonical_bytes()
        out += _U32.pack(len(name))
        out += name
        out += _U32.pack(len(payload))
        out += payload
    else:
        raise TypeError(f"not a value: {v!r}")


def encode(v: Value) -> bytes:
    """Canonical byte encoding of ``v``; raises NonSerializable on opaque foreign data."""
    out = bytearray()
    _encode_into(v, out)
    return bytes(out)


class _Reader:
    def __init__(self, data: bytes, foreign_types: Mapping[str, ForeignType]):
        self.data = data
        self.pos = 0
        self.foreign_types = foreign_types

    def take(self, n: int) -> bytes:
        end = self.pos + n
        if end > len(self.data):
            raise DecodeError("truncated value encoding")
        chunk = self.data[self.pos:end]
        self.pos = end
        return chunk

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def text(self) -> str:
        try:
            return self.take(self.u32()).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DecodeError(str(exc)) from exc

    def value(self) -> Value:
        tag = self.take(1)[0]
        if tag == TAG_UNIT:
            return UNIT
        if tag == TAG_NULL:
            return NULL
        if tag == TAG_BOOL:
            b = self.take(1)[0]
            if b > 1:
                raise DecodeError("bad bool payload")
            return TRUE if b else FALSE
        if tag == TAG_INT:
            return IntV(_I64.unpack(self.take(8))[0])
        if tag == TAG_STR:
            return StrV(self.text())
        if tag == TAG_PATH:
            return PathV(self.text())
        if tag in (TAG_LIST, TAG_TUPLE):
            n = self.u32()
            elems = tuple(self.value() for _ in range(n))
            try:
                return ListV(elems) if tag == TAG_LIST else TupleV(elems)
            except TypeError as exc:
                raise DecodeError(str(exc)) from exc
        if tag == TAG_FOREIGN:
            name = self.text()
            payload = self.take(self.u32())
            ftype = self.foreign_types.get(name)
            if ftype is None or ftype.from_bytes is None:
                return ForeignV(opaque_type(name), payload)
            return ForeignV(ftype, ftype.from_bytes(payload))
        raise DecodeError(f"unknown value tag {tag}")


def decode(data: bytes, foreign_types: Mapping[str, ForeignType] | None = None) -> Value:
    """Inverse of :func:`encode`. Unknown foreign types decode to opaque values."""
    reader = _Reader(data, foreign_types or {})
    v = reader.value()
    if reader.pos != len(data):
        raise DecodeError("trailing bytes after value")
    return v


# -- display -----------------------------------------------------------------


def to_display_string(v: Value) -> str:
    if isinstance(v, (StrV, PathV)):
        return v.value
    if isinstance(v, BoolV):
        return "true" if v.value else "false"
    if isinstance(v, IntV):
        return str(v.value)
    if isinstance(v, UnitV):
        return "unit"
    if isinstance(v, NullV):
        return "null"
    if isinstance(v, ListV):
        return "[" + ", ".join(to_display_string(e) for e in v.elems) + "]"
    if isinstance(v, TupleV):
        return "(" + ", ".join(to_display_string(e) for e in v.elems) + ")"
    if isinstance(v, ForeignV):
        return v.ftype.display(v.handle)
    raise TypeError(f"not a value: {v!r}")


# -- conversion helpers for host code ---------------------------------------


def from_python(obj: Any) -> Value:
    """Convert plain Python data to a value (tuples become tuples, lists lists)."""
    if isinstance(obj, Value):
        return obj
    if obj is None:
        return NULL
    if isinstance(obj, bool):
        return BoolV(obj)
    if isinstance(obj, int):
        return IntV(obj)
    if isinstance(obj, str):
        return StrV(obj)
    if isinstance(obj, tuple):
        return TupleV(tuple(from_python(o) for o in obj))
    if isinstance(obj, list):
        return ListV(tuple(from_python(o) for o in obj))
    raise TypeError(f"cannot convert {type(obj).__name__} to a value")


def to_python(v: Value) -> Any:
    if isinstance(v, (BoolV, IntV, StrV)):
        return v.value
    if isinstance(v, PathV):
        return v.value
    if isinstance(v, (UnitV, NullV)):
        return None
    if isinstance(v, ListV):
        return [to_python(e) for e in v.elems]
    if isinstance(v, TupleV):
        return tuple(to_python(e) for e in v.elems)
    if isinstance(v, ForeignV):
        return v.handle
    raise TypeError(f"not a value: {v!r}")


def paths(values: Iterable[str]) -> ListV:
    return ListV(tuple(PathV(p) for p in values))


@dataclass(frozen=True)
class Transient:
    """Marks a task output that is kept in memory only and never persisted."""

    value: Value

"""Single-file persistent store for task results and the generator index.

Layout::

    b"PIESTORE" | u32 version | str hash-algorithm | u64 body length |
    32-byte sha256 of body | body

The body holds two namespaces: task records (key bytes -> task data bytes)
and the generator index (path text -> key bytes). Commits rewrite the whole
file into a shadow file and rename it over the old one, so a crash leaves
either the previous or the new committed state on disk.
"""

from __future__ import annotations

import fcntl
import hashlib
import os
import struct
from dataclasses import dataclass
from typing import Iterator, Mapping, Union

from pie.errors import CorruptStore, DecodeError, OverlapError, StoreLocked
from pie.stampers import HASH_ALGORITHM, Filter, FilterKind, OutputStamper, PathStamper, Stamp
from pie.values import ForeignType, Value, decode, encode, to_display_string

MAGIC = b"PIESTORE"
VERSION = 1

_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")
_I64 = struct.Struct("<q")


@dataclass(frozen=True)
class TaskKey:
    """Identity of a function call: function id plus canonical input bytes."""

    func_id: str
    input: bytes

    def __post_init__(self):
        if not self.func_id:
            raise ValueError("func_id must be non-empty")

    @classmethod
    def of(cls, func_id: str, value: Value) -> "TaskKey":
        return cls(func_id, encode(value))

    def describe(self, foreign_types: Mapping[str, ForeignType] | None = None) -> str:
        try:
            arg = to_display_string(decode(self.input, foreign_types))
        except DecodeError:
            arg = self.input.hex()
        return f"{self.func_id}({arg})"

    def digest(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()[:12]

    def to_bytes(self) -> bytes:
        w = _Writer()
        w.text(self.func_id)
        w.blob(self.input)
        return w.getvalue()

    @classmethod
    def from_bytes(cls, raw: bytes) -> "TaskKey":
        r = _Reader(raw)
        key = cls(r.text(), r.blob())
        r.done()
        return key

    def __str__(self) -> str:
        return self.describe()


@dataclass(frozen=True)
class CallDep:
    callee: TaskKey
    stamper: OutputStamper
    stamp: Stamp


@dataclass(frozen=True)
class RequireDep:
    path: str
    stamper: PathStamper
    filter: Filter | None
    stamp: Stamp


@dataclass(frozen=True)
class GenerateDep:
    path: str
    stamper: PathStamper
    stamp: Stamp


Dependency = Union[CallDep, RequireDep, GenerateDep]

PERSISTED = "persisted"
TRANSIENT = "transient"


@dataclass(frozen=True)
class OutputRecord:
    kind: str
    value: Value | None = None

    @property
    def transient(self) -> bool:
        return self.kind == TRANSIENT


@dataclass(frozen=True)
class TaskData:
    input: Value
    output: OutputRecord
    deps: tuple[Dependency, ...]

    def generated_paths(self) -> list[str]:
        return [d.path for d in self.deps if isinstance(d, GenerateDep)]


# -- binary codec ------------------------------------------------------------


class _Writer:
    def __init__(self):
        self.buf = bytearray()

    def u8(self, n: int):
        self.buf.append(n)

    def u32(self, n: int):
        self.buf += _U32.pack(n)

    def blob(self, b: bytes):
        self.u32(len(b))
        self.buf += b

    def text(self, s: str):
        self.blob(s.encode("utf-8"))

    def getvalue(self) -> bytes:
        return bytes(self.buf)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        end = self.pos + n
        if end > len(self.data):
            raise DecodeError("truncated record")
        out = self.data[self.pos:end]
        self.pos = end
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def blob(self) -> bytes:
        return self.take(self.u32())

    def text(self) -> str:
        try:
            return self.blob().decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DecodeError(str(exc)) from exc

    def done(self):
        if self.pos != len(self.data):
            raise DecodeError("trailing bytes in record")


def _write_stamp(w: _Writer, s: Stamp):
    w.text(s.kind)
    p = s.payload
    if p is None:
        w.u8(0)
    elif isinstance(p, bool):
        w.u8(1)
        w.u8(int(p))
    elif isinstance(p, int):
        w.u8(2)
        w.buf += _I64.pack(p)
    else:
        w.u8(3)
        w.blob(p)


def _read_stamp(r: _Reader) -> Stamp:
    kind = r.text()
    t = r.u8()
    if t == 0:
        return Stamp(kind, None)
    if t == 1:
        return Stamp(kind, bool(r.u8()))
    if t == 2:
        return Stamp(kind, _I64.unpack(r.take(8))[0])
    if t == 3:
        return Stamp(kind, r.blob())
    raise DecodeError(f"bad stamp payload tag {t}")


def _write_filter(w: _Writer, f: Filter | None):
    if f is None:
        w.u8(0)
        return
    w.u8(1)
    w.text(f.kind.value)
    w.u32(len(f.args))
    for a in f.args:
        w.text(a)
    w.u8(int(f.dirs))
    w.text(f.base)


def _read_filter(r: _Reader) -> Filter | None:
    if r.u8() == 0:
        return None
    kind = FilterKind(r.text())
    args = tuple(r.text() for _ in range(r.u32()))
    dirs = bool(r.u8())
    return Filter(kind, args, dirs, r.text())


def encode_task_data(d: TaskData) -> bytes:
    w = _Writer()
    w.blob(encode(d.input))
    if d.output.transient:
        w.u8(1)
    else:
        w.u8(0)
        w.blob(encode(d.output.value))
    w.u32(len(d.deps))
    for dep in d.deps:
        if isinstance(dep, CallDep):
            w.u8(0)
            w.blob(dep.callee.to_bytes())
            w.text(dep.stamper.value)
            _write_stamp(w, dep.stamp)
        elif isinstance(dep, RequireDep):
            w.u8(1)
            w.text(dep.path)
            w.text(dep.stamper.value)
            _write_filter(w, dep.filter)
            _write_stamp(w, dep.stamp)
        else:
            w.u8(2)
            w.text(dep.path)
            w.text(dep.stamper.value)
            _write_stamp(w, dep.stamp)
    return w.getvalue()


def decode_task_data(raw: bytes, foreign_types: Mapping[str, ForeignType] | None = None) -> TaskData:
    r = _Reader(raw)
    inp = decode(r.blob(), foreign_types)
    if r.u8() == 1:
        out = OutputRecord(TRANSIENT)
    else:
        out = OutputRecord(PERSISTED, decode(r.blob(), foreign_types))
    deps: list[Dependency] = []
    for _ in range(r.u32()):
        tag = r.u8()
        if tag == 0:
            callee = TaskKey.from_bytes(r.blob())
            deps.append(CallDep(callee, OutputStamper(r.text()), _read_stamp(r)))
        elif tag == 1:
            path = r.text()
            st = PathStamper(r.text())
            f = _read_filter(r)
            deps.append(RequireDep(path, st, f, _read_stamp(r)))
        elif tag == 2:
            path = r.text()
            st = PathStamper(r.text())
            deps.append(GenerateDep(path, st, _read_stamp(r)))
        else:
            raise DecodeError(f"bad dependency tag {tag}")
    r.done()
    return TaskData(inp, out, tuple(deps))


def _generate_paths_of(raw: bytes) -> list[str]:
    return decode_task_data(raw, None).generated_paths()


# -- the store ---------------------------------------------------------------


class Store:
    """Key-value store of task records with an atomic ``commit``.

    Reads and writes operate on a working copy; ``commit`` makes it durable,
    ``rollback`` discards everything written since the last commit. A store
    opened with ``location=None`` lives in memory only.
    """

    def __init__(self, location: str | os.PathLike | None = None,
                 foreign_types: Mapping[str, ForeignType] | None = None):
        self.location = os.fspath(location) if location is not None else None
        self.foreign_types = dict(foreign_types or {})
        self._lock_fd: int | None = None
        self._closed = False
        self._tasks: dict[TaskKey, bytes] = {}
        self._generators: dict[str, TaskKey] = {}
        if self.location is not None:
            os.makedirs(os.path.dirname(os.path.abspath(self.location)), exist_ok=True)
            self._acquire_lock()
            try:
                self._load()
            except BaseException:
                self._release_lock()
                raise
        self._committed = (dict(self._tasks), dict(self._generators))
        self._reindex()
        self._cache: dict[TaskKey, TaskData] = {}

    # locking -------------------------------------------------------------

    def _acquire_lock(self):
        fd = os.open(self.location + ".lock", os.O_RDWR | os.O_CREAT, 0o644)
        try:
            fcntl.flock(fd, fcntl.LOCK_EX | fcntl.LOCK_NB)
        except BlockingIOError:
            os.close(fd)
            raise StoreLocked(f"store {self.location} is in use by another handle") from None
        self._lock_fd = fd

    def _release_lock(self):
        if self._lock_fd is not None:
            fcntl.flock(self._lock_fd, fcntl.LOCK_UN)
            os.close(self._lock_fd)
            self._lock_fd = None

    # serialization ---------------------------------------------------------

    def _load(self):
        try:
            with open(self.location, "rb") as fh:
                data = fh.read()
        except FileNotFoundError:
            return
        head = len(MAGIC) + 4
        if len(data) < head or data[: len(MAGIC)] != MAGIC:
            raise CorruptStore(f"{self.location}: bad magic header")
        version = _U32.unpack_from(data, len(MAGIC))[0]
        if version != VERSION:
            raise CorruptStore(f"{self.location}: unsupported format version {version}")
        try:
            r = _Reader(data)
            r.pos = head
            algo = r.text()
            if algo != HASH_ALGORITHM:
                raise CorruptStore(f"{self.location}: stamps use {algo}, expected {HASH_ALGORITHM}")
            length = _U64.unpack(r.take(8))[0]
            checksum = r.take(32)
            body = r.take(length)
            r.done()
            if hashlib.sha256(body).digest() != checksum:
                raise CorruptStore(f"{self.location}: checksum mismatch")
            b = _Reader(body)
            for _ in range(b.u32()):
                key = TaskKey.from_bytes(b.blob())
                self._tasks[key] = b.blob()
            for _ in range(b.u32()):
                path = b.text()
                self._generators[path] = TaskKey.from_bytes(b.blob())
            b.done()
        except DecodeError as exc:
            raise CorruptStore(f"{self.location}: {exc}") from exc

    def _serialize(self) -> bytes:
        body = _Writer()
        body.u32(len(self._tasks))
        for key in sorted(self._tasks, key=lambda k: (k.func_id, k.input)):
            body.blob(key.to_bytes())
            body.blob(self._tasks[key])
        body.u32(len(self._generators))
        for path in sorted(self._generators):
            body.text(path)
            body.blob(self._generators[path].to_bytes())
        raw = body.getvalue()
        w = _Writer()
        w.buf += MAGIC
        w.u32(VERSION)
        w.text(HASH_ALGORITHM)
        w.buf += _U64.pack(len(raw))
        w.buf += hashlib.sha256(raw).digest()
        w.buf += raw
        return w.getvalue()

    def _reindex(self):
        self._generated_by: dict[TaskKey, set[str]] = {}
        for path, key in self._generators.items():
            self._generated_by.setdefault(key, set()).add(path)

    # public API ------------------------------------------------------------

    def _check_open(self):
        if self._closed:
            raise ValueError("store is closed")

    def get_task(self, key: TaskKey) -> TaskData | None:
        self._check_open()
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        raw = self._tasks.get(key)
        if raw is None:
            return None
        data = decode_task_data(raw, self.foreign_types)
        self._cache[key] = data
        return data

    def set_task(self, key: TaskKey, data: TaskData) -> None:
        self._check_open()
        raw = encode_task_data(data)
        new_paths = data.generated_paths()
        for path in new_paths:
            owner = self._generators.get(path)
            if owner is not None and owner != key:
                raise OverlapError(path, key, owner)
        self._unindex(key)
        self._tasks[key] = raw
        self._cache[key] = data
        for path in new_paths:
            self._generators[path] = key
        if new_paths:
            self._generated_by[key] = set(new_paths)

    def _unindex(self, key: TaskKey):
        for path in self._generated_by.pop(key, ()):
            if self._generators.get(path) == key:
                del self._generators[path]

    def drop_task(self, key: TaskKey) -> None:
        self._check_open()
        self._unindex(key)
        self._tasks.pop(key, None)
        self._cache.pop(key, None)

    def drop_all(self) -> None:
        self._check_open()
        self._tasks.clear()
        self._generators.clear()
        self._generated_by.clear()
        self._cache.clear()

    def get_generator(self, path: str) -> TaskKey | None:
        self._check_open()
        return self._generators.get(path)

    def keys(self) -> list[TaskKey]:
        return list(self._tasks)

    def tasks(self) -> Iterator[tuple[TaskKey, TaskData]]:
        for key in list(self._tasks):
            yield key, self.get_task(key)

    def generators(self) -> dict[str, TaskKey]:
        return dict(self._generators)

    def __len__(self) -> int:
        return len(self._tasks)

    def __contains__(self, key: TaskKey) -> bool:
        return key in self._tasks

    def commit(self) -> None:
        self._check_open()
        if self.location is not None:
            snapshot = (self._tasks, self._generators)
            if snapshot != self._committed or not os.path.exists(self.location):
                self._write_atomic(self._serialize())
        self._committed = (dict(self._tasks), dict(self._generators))

    def _write_atomic(self, data: bytes):
        tmp = self.location + ".tmp"
        with open(tmp, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, self.location)
        dir_fd = os.open(os.path.dirname(os.path.abspath(self.location)), os.O_RDONLY)
        try:
            os.fsync(dir_fd)
        finally:
            os.close(dir_fd)

    def rollback(self) -> None:
        self._check_open()
        self._tasks = dict(self._committed[0])
        self._generators = dict(self._committed[1])
        self._reindex()
        self._cache.clear()

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            self._release_lock()

    def __enter__(self) -> "Store":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def __del__(self):
        try:
            self._release_lock()
        except Exception:
            pass


def open_store(location: str | os.PathLike | None,
               foreign_types: Mapping[str, ForeignType] | None = None) -> Store:
    """Open (or create on first commit) the store at ``location``."""
    return Store(location, foreign_types)

"""Incremental, persistent execution of tasks with dynamic dependencies.

A task is a registered host callable taking an :class:`ExecContext` and an
input :class:`~pie.values.Value`. While it runs it records dependencies
through the context: calls to other tasks, paths it reads (``require_path``)
and paths it writes (``generate_path``). The runtime stores the output and
the recorded dependencies, and in later sessions re-executes a task only when
one of those dependencies has changed.

Validation is top-down: ``Session.require`` checks the dependencies of a
task in recorded order, bringing callees and path generators up to date
first, and re-executes the task on the first inconsistency.
"""

from __future__ import annotations

import hashlib
import logging
from collections import Counter
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Iterator, Union

from pie.errors import (
    CycleDetected,
    HiddenDepError,
    OverlapError,
    PieError,
    TaskFailed,
    UnknownTask,
)
from pie.stampers import (
    Filter,
    OutputStamper,
    PathStamper,
    stamp_output,
    stamp_path,
)
from pie.store import (
    PERSISTED,
    TRANSIENT,
    CallDep,
    GenerateDep,
    OutputRecord,
    RequireDep,
    Store,
    TaskData,
    TaskKey,
)
from pie.values import ForeignType, PathV, Transient, Value, decode, normalize_path

log = logging.getLogger(__name__)

Output = Union[Value, Transient]
TaskImpl = Callable[["ExecContext", Value], Output]


class TaskRegistry:
    """Maps function ids to task implementations, plus known foreign types."""

    def __init__(self):
        self.tasks: dict[str, TaskImpl] = {}
        self.foreign_types: dict[str, ForeignType] = {}

    def register(self, func_id: str, impl: TaskImpl) -> None:
        self.tasks[func_id] = impl

    def register_type(self, ftype: ForeignType) -> None:
        self.foreign_types[ftype.name] = ftype

    def task(self, func_id: str):
        """Decorator form of :meth:`register`."""

        def deco(fn: TaskImpl) -> TaskImpl:
            self.register(func_id, fn)
            return fn

        return deco

    def get(self, func_id: str) -> TaskImpl:
        try:
            return self.tasks[func_id]
        except KeyError:
            raise UnknownTask(func_id) from None

    def __contains__(self, func_id: str) -> bool:
        return func_id in self.tasks


def _path_text(p: str | PathV) -> str:
    return p.value if isinstance(p, PathV) else normalize_path(p)


def _unwrap(out: Output) -> Value:
    return out.value if isinstance(out, Transient) else out


class ExecContext:
    """Dependency recorder handed to a task while it executes."""

    def __init__(self, session: "Session", current: TaskKey):
        self.session = session
        self.current = current
        self.deps: list = []
        self.generated: set[str] = set()

    def require_call(self, callee: TaskKey, stamper: OutputStamper = OutputStamper.EQUALS) -> Value:
        out = self.session._require(callee)
        self.deps.append(CallDep(callee, OutputStamper(stamper), stamp_output(out, stamper)))
        return _unwrap(out)

    def call(self, func_id: str, input: Value, stamper: OutputStamper = OutputStamper.EQUALS) -> Value:
        return self.require_call(TaskKey.of(func_id, input), stamper)

    def require_path(self, p: str | PathV, stamper: PathStamper = PathStamper.MODIFIED,
                     filter: Filter | None = None) -> None:
        path = _path_text(p)
        s = self.session
        gen = s.generator_of(path)
        if gen is not None and gen != self.current:
            out = s._require(gen)
            self.deps.append(CallDep(gen, OutputStamper.EQUALS, stamp_output(out, OutputStamper.EQUALS)))
        stamper = PathStamper(stamper)
        self.deps.append(RequireDep(path, stamper, filter, stamp_path(path, stamper, filter)))
        s._note_required(path, self.current)

    def generate_path(self, p: str | PathV, stamper: PathStamper = PathStamper.HASH) -> None:
        path = _path_text(p)
        s = self.session
        other = s.generator_of(path)
        if other is not None and other != self.current:
            raise OverlapError(path, self.current, other)
        for requirer in s._required_by.get(path, ()):
            if requirer != self.current and not s._depends_on(requirer, self.current):
                raise HiddenDepError(path, self.current, requirer)
        stamper = PathStamper(stamper)
        self.deps.append(GenerateDep(path, stamper, stamp_path(path, stamper)))
        self.generated.add(path)
        s._pending_generators[path] = self.current


class Session:
    """One top-down incremental pass; each task runs at most once per session."""

    def __init__(self, store: Store, registry: TaskRegistry, memory_cache: dict | None = None):
        self.store = store
        self.registry = registry
        store.foreign_types.update(registry.foreign_types)
        self.consistent: set[TaskKey] = set()
        self.executing: list[TaskKey] = []
        self.exec_count: Counter[TaskKey] = Counter()
        self.memory_cache: dict[TaskKey, Value] = memory_cache if memory_cache is not None else {}
        self._requiring: list[TaskKey] = []
        self._pending_generators: dict[str, TaskKey] = {}
        self._required_by: dict[str, list[TaskKey]] = {}
        self._touched_transients: set[TaskKey] = set()

    # public ------------------------------------------------------------------

    def require(self, key: TaskKey) -> Value:
        return _unwrap(self._require(key))

    def call(self, func_id: str, input: Value) -> Value:
        return self.require(TaskKey.of(func_id, input))

    @property
    def total_executions(self) -> int:
        return sum(self.exec_count.values())

    def executions_of(self, func_id: str) -> int:
        return sum(n for k, n in self.exec_count.items() if k.func_id == func_id)

    def generator_of(self, path: str) -> TaskKey | None:
        pending = self._pending_generators.get(path)
        return pending if pending is not None else self.store.get_generator(path)

    def abort(self) -> None:
        """Discard uncommitted store writes and transient values of this session."""
        self.store.rollback()
        for key in self._touched_transients:
            self.memory_cache.pop(key, None)

    # algorithm -----------------------------------------------------------------

    def _require(self, key: TaskKey) -> Output:
        if key in self.consistent:
            return self._cached_output(key)
        if key in self._requiring:
            raise CycleDetected(self._requiring[self._requiring.index(key):] + [key])
        self._requiring.append(key)
        try:
            data = self.store.get_task(key)
            if data is None:
                log.debug("execute %s: no stored result", key)
                return self._execute(key)
            reason = self._inconsistency(key, data)
            if reason is None and data.output.transient and key not in self.memory_cache:
                reason = "transient output not in memory"
            if reason is not None:
                log.debug("execute %s: %s", key, reason)
                return self._execute(key)
            self.consistent.add(key)
            return self._cached_output(key)
        finally:
            self._requiring.pop()

    def _inconsistency(self, key: TaskKey, data: TaskData) -> str | None:
        for dep in data.deps:
            if isinstance(dep, CallDep):
                out = self._require(dep.callee)
                if stamp_output(out, dep.stamper) != dep.stamp:
                    return f"output of {dep.callee} changed"
            elif isinstance(dep, RequireDep):
                gen = self.generator_of(dep.path)
                if gen is not None and gen != key:
                    self._require(gen)
                self._note_required(dep.path, key)
                if stamp_path(dep.path, dep.stamper, dep.filter) != dep.stamp:
                    return f"required path {dep.path} changed"
            else:
                if stamp_path(dep.path, dep.stamper) != dep.stamp:
                    return f"generated path {dep.path} changed"
        return None

    def _execute(self, key: TaskKey) -> Output:
        impl = self.registry.get(key.func_id)
        input = decode(key.input, self.store.foreign_types)
        ctx = ExecContext(self, key)
        self.executing.append(key)
        try:
            result = impl(ctx, input)
        except PieError:
            self._forget_pending(ctx)
            raise
        except Exception as exc:
            self._forget_pending(ctx)
            raise TaskFailed(f"{key}: {type(exc).__name__}: {exc}", key) from exc
        finally:
            self.executing.pop()
        transient = isinstance(result, Transient)
        value = _unwrap(result)
        if not isinstance(value, Value):
            self._forget_pending(ctx)
            raise TaskFailed(f"{key}: task returned {type(value).__name__}, not a value", key)
        record = OutputRecord(TRANSIENT) if transient else OutputRecord(PERSISTED, value)
        try:
            self.store.set_task(key, TaskData(input, record, tuple(ctx.deps)))
        finally:
            self._forget_pending(ctx)
        self.consistent.add(key)
        self.exec_count[key] += 1
        if transient:
            self.memory_cache[key] = value
            self._touched_transients.add(key)
        else:
            self.memory_cache.pop(key, None)
        return result

    def _forget_pending(self, ctx: ExecContext) -> None:
        for path in ctx.generated:
            if self._pending_generators.get(path) == ctx.current:
                del self._pending_generators[path]

    def _cached_output(self, key: TaskKey) -> Output:
        data = self.store.get_task(key)
        if data.output.transient:
            return Transient(self.memory_cache[key])
        return data.output.value

    def _note_required(self, path: str, key: TaskKey) -> None:
        requirers = self._required_by.setdefault(path, [])
        if key not in requirers:
            requirers.append(key)

    def _depends_on(self, source: TaskKey, target: TaskKey) -> bool:
        # tasks still on the execution stack are callers of the current task
        if source in self.executing:
            return True
        seen = set()
        todo = [source]
        while todo:
            k = todo.pop()
            if k == target:
                return True
            if k in seen:
                continue
            seen.add(k)
            data = self.store.get_task(k)
            if data is None:
                continue
            todo.extend(d.callee for d in data.deps if isinstance(d, CallDep))
        return False


class Pie:
    """Runtime owning a store, a registry and the in-memory transient cache.

    The transient cache outlives sessions, so a transient task executes once
    per ``Pie`` instance and is reused by later sessions of the same instance.
    """

    def __init__(self, store: Store, registry: TaskRegistry):
        self.store = store
        self.registry = registry
        self.memory_cache: dict[TaskKey, Value] = {}

    def new_session(self) -> Session:
        return Session(self.store, self.registry, self.memory_cache)

    @contextmanager
    def session(self) -> Iterator[Session]:
        """Session that commits on success and rolls the store back on error."""
        s = self.new_session()
        try:
            yield s
        except BaseException:
            s.abort()
            raise
        self.store.commit()


def new_session(store: Store, registry: TaskRegistry) -> Session:
    return Session(store, registry)


# -- dependency graph export ---------------------------------------------------


@dataclass
class DependencyGraph:
    tasks: list[TaskKey] = field(default_factory=list)
    paths: list[str] = field(default_factory=list)
    edges: list[tuple[object, object, str]] = field(default_factory=list)

    def to_dot(self) -> str:
        def tid(k: TaskKey) -> str:
            return f"t_{k.digest()}"

        path_ids = {p: f"p_{i}" for i, p in enumerate(self.paths)}
        lines = ["digraph pie {"]
        for k in self.tasks:
            inp = hashlib.sha256(k.input).hexdigest()[:8]
            lines.append(f'  {tid(k)} [shape=box, label="{_dot_escape(k.func_id)} #{inp}"];')
        for p in self.paths:
            lines.append(f'  {path_ids[p]} [shape=note, label="{_dot_escape(p)}"];')
        for src, dst, kind in self.edges:
            a = tid(src)
            b = tid(dst) if isinstance(dst, TaskKey) else path_ids[dst]
            lines.append(f"  {a} -> {b} [kind={kind}];")
        lines.append("}")
        return "\n".join(lines) + "\n"


def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def export_dep_graph(store: Store | Session) -> DependencyGraph:
    """Every stored task as a node and every stored dependency as a typed edge."""
    if isinstance(store, Session):
        store = store.store
    graph = DependencyGraph()
    seen_paths: dict[str, None] = {}
    items = sorted(store.tasks(), key=lambda kv: (kv[0].func_id, kv[0].input))
    for key, data in items:
        graph.tasks.append(key)
        for dep in data.deps:
            if isinstance(dep, CallDep):
                graph.edges.append((key, dep.callee, "call"))
            else:
                seen_paths.setdefault(dep.path)
                kind = "require" if isinstance(dep, RequireDep) else "generate"
                graph.edges.append((key, dep.path, kind))
    graph.paths = list(seen_paths)
    return graph

"""Command-line interface: ``pie check|run|clean|graph|watch``.

Exit status is 0 on success, 1 when a pipeline run fails (the store is
rolled back to its last commit) and 2 for usage, I/O or static errors.
"""

from __future__ import annotations

import argparse
import importlib
import logging
import os
import sys
import time
from dataclasses import dataclass
from typing import Optional, Sequence

from pie.dsl.checker import TypedProgram, check, entry_signature
from pie.dsl.diagnostics import DiagnosticError
from pie.dsl.interp import ForeignRegistry, call_entry, conforms, install_stdlib, pack, parse_argument, register_program
from pie.dsl.parser import parse_program
from pie.errors import PieError
from pie.runtime import Pie, TaskRegistry, export_dep_graph
from pie.stampers import stamp_path
from pie.store import CallDep, Store, TaskKey, open_store
from pie.values import Value, to_display_string

DEFAULT_STORE = os.path.join(".pie", "store")
MIN_INTERVAL_MS = 10

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class CliConfig:
    store_path: str
    working_dir: str
    poll_interval_ms: int = 500
    plugins: tuple[str, ...] = ()

    def __post_init__(self):
        if self.poll_interval_ms < MIN_INTERVAL_MS:
            raise UsageError(f"poll interval must be at least {MIN_INTERVAL_MS} ms")


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def load_program(path: str) -> TypedProgram:
    try:
        with open(path, encoding="utf-8") as fh:
            source = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from exc
    return check(parse_program(source, path))


def build_foreign(cfg: CliConfig) -> ForeignRegistry:
    fr = install_stdlib(ForeignRegistry(cfg.working_dir))
    for name in cfg.plugins:
        try:
            module = importlib.import_module(name)
        except ImportError as exc:
            raise UsageError(f"cannot load plugin {name}: {exc}") from exc
        hook = getattr(module, "pie_plugin", None)
        if hook is None:
            raise UsageError(f"plugin {name} has no pie_plugin(registry) function")
        hook(fr)
    return fr


class Runner:
    """A loaded program bound to one store; reused across watch iterations."""

    def __init__(self, program: str, func: str, args: Sequence[str], cfg: CliConfig):
        self.tp = load_program(program)
        self.fr = build_foreign(cfg)
        self.registry = TaskRegistry()
        try:
            register_program(self.tp, self.fr, self.registry)
            params, _ = entry_signature(self.tp, func)
        except PieError as exc:
            raise UsageError(str(exc)) from exc
        if len(args) != len(params):
            raise UsageError(f"{func} takes {len(params)} argument(s) but {len(args)} given")
        try:
            self.args: list[Value] = [parse_argument(a, t, cfg.working_dir) for a, t in zip(args, params)]
        except PieError as exc:
            raise UsageError(str(exc)) from exc
        for text, v, t in zip(args, self.args, params):
            if not conforms(self.tp, self.fr, v, t):
                raise UsageError(f"argument {text!r} is not a {t}")
        self.func = func
        self.key = TaskKey.of(func, pack(self.args))
        try:
            self.store = open_store(cfg.store_path, self.registry.foreign_types)
        except PieError as exc:
            raise UsageError(str(exc)) from exc
        self.pie = Pie(self.store, self.registry)
        self._failed_state: list | None = None
        self._last_error: str | None = None

    def run_once(self) -> int:
        try:
            with self.pie.session() as s:
                result = call_entry(s, self.tp, self.func, self.args, self.fr)
        except PieError as exc:
            message = f"error: {exc}"
            if message != self._last_error:
                _err(message)
            self._last_error = message
            return EXIT_FAILED
        self._last_error = None
        print(to_display_string(result))
        print(f"executed {s.total_executions} task(s)")
        sys.stdout.flush()
        return EXIT_OK

    def poll_once(self) -> bool:
        """Re-stamp the recorded file dependencies and re-run if any changed.

        A failed run leaves the old stamps in the store, so the failing file
        state is remembered and only retried once it changes again. When the
        entry never completed nothing is recorded and every poll retries;
        a repeated identical error is printed once.
        """
        stale = changed_dependencies(self.store, self.key)
        if not stale or stale == self._failed_state:
            return False
        if self.run_once() == EXIT_OK:
            self._failed_state = None
        elif self.store.get_task(self.key) is not None:
            self._failed_state = changed_dependencies(self.store, self.key)
        return True

    def close(self) -> None:
        self.store.close()


def changed_dependencies(store: Store, root: TaskKey) -> list[tuple]:
    """(path, current stamp) for every recorded file dependency now out of date."""
    out: list[tuple] = []
    seen: set[TaskKey] = set()
    todo = [root]
    while todo:
        key = todo.pop()
        if key in seen:
            continue
        seen.add(key)
        data = store.get_task(key)
        if data is None:
            out.append((str(key), None))
            continue
        for dep in data.deps:
            if isinstance(dep, CallDep):
                todo.append(dep.callee)
            else:
                filt = getattr(dep, "filter", None)
                now = stamp_path(dep.path, dep.stamper, filt)
                if now != dep.stamp:
                    out.append((dep.path, now))
    return out


# -- commands ------------------------------------------------------------------


def cmd_check(program: str) -> int:
    try:
        load_program(program)
    except UsageError as exc:
        _err(f"error: {exc}")
        return EXIT_USAGE
    except DiagnosticError as exc:
        for line in exc.render():
            _err(line)
        return EXIT_USAGE
    return EXIT_OK


def cmd_run(program: str, func: str, args: Sequence[str], cfg: CliConfig) -> int:
    runner = Runner(program, func, args, cfg)
    try:
        return runner.run_once()
    finally:
        runner.close()


def cmd_clean(cfg: CliConfig) -> int:
    if not os.path.exists(cfg.store_path):
        return EXIT_OK
    try:
        with open_store(cfg.store_path) as store:
            store.drop_all()
            store.commit()
    except (PieError, OSError) as exc:
        _err(f"error: {exc}")
        return EXIT_USAGE
    return EXIT_OK


def cmd_graph(cfg: CliConfig, fmt: str = "dot") -> int:
    if fmt != "dot":
        raise UsageError(f"unsupported graph format {fmt}")
    if not os.path.exists(cfg.store_path):
        _err(f"error: no store at {cfg.store_path}")
        return EXIT_USAGE
    try:
        with open_store(cfg.store_path, build_foreign(cfg).types) as store:
            sys.stdout.write(export_dep_graph(store).to_dot())
    except (PieError, OSError) as exc:
        _err(f"error: {exc}")
        return EXIT_USAGE
    return EXIT_OK


def cmd_watch(program: str, func: str, args: Sequence[str], cfg: CliConfig,
              iterations: Optional[int] = None) -> int:
    runner = Runner(program, func, args, cfg)
    polls = 0
    try:
        runner.run_once()
        while iterations is None or polls < iterations:
            time.sleep(cfg.poll_interval_ms / 1000)
            polls += 1
            runner.poll_once()
    except KeyboardInterrupt:
        pass
    finally:
        runner.close()
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--store", help="store file (default $PIE_STORE or ./.pie/store)")
    common.add_argument("--cwd", help="working directory for relative arguments and exec")
    common.add_argument("--plugin", action="append", default=[], metavar="MODULE",
                        help="module with a pie_plugin(registry) hook, e.g. pie.corpus")
    common.add_argument("-v", "--verbose", action="store_true", help="log why tasks execute")

    parser = argparse.ArgumentParser(prog="pie", description="Incremental pipelines from PIE programs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", parents=[common], help="parse and type check a program")
    p.add_argument("program")

    for name, text in (("run", "run a function incrementally"), ("watch", "re-run when inputs change")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("program")
        p.add_argument("function")
        p.add_argument("args", nargs="*", help="arguments as literals, e.g. '[\"-wi\", \"0\"]'")
        if name == "watch":
            p.add_argument("--interval", type=int, default=500, help="poll interval in ms (min 10)")
            p.add_argument("--iterations", type=int, default=None, help=argparse.SUPPRESS)

    sub.add_parser("clean", parents=[common], help="drop every stored task")
    p = sub.add_parser("graph", parents=[common], help="print the dependency graph")
    p.add_argument("--format", default="dot", choices=["dot"])
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if ns.verbose:
        logging.basicConfig(level=logging.DEBUG, format="%(name)s: %(message)s")
    cwd = os.path.abspath(ns.cwd or os.getcwd())
    store = ns.store or os.environ.get("PIE_STORE") or DEFAULT_STORE
    try:
        cfg = CliConfig(os.path.join(cwd, store), cwd, getattr(ns, "interval", 500), tuple(ns.plugin))
        if ns.command == "check":
            return cmd_check(ns.program)
        if ns.command == "run":
            return cmd_run(ns.program, ns.function, ns.args, cfg)
        if ns.command == "watch":
            return cmd_watch(ns.program, ns.function, ns.args, cfg, ns.iterations)
        if ns.command == "clean":
            return cmd_clean(cfg)
        return cmd_graph(cfg, ns.format)
    except UsageError as exc:
        _err(f"error: {exc}")
        return EXIT_USAGE
    except DiagnosticError as exc:
        for line in exc.render():
            _err(line)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

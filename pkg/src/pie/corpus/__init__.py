"""Runnable example pipelines with stand-in tools.

The package doubles as a CLI plugin (``pie run --plugin pie.corpus ...``): it
installs the stub executables and registers the foreign functions and data
types the bundled programs bind to.
"""

from __future__ import annotations

import hashlib
import os
import stat
import sys
import tempfile
from importlib import resources

from pie.corpus.foreign import register_foreign_stubs

STUBS = ("sdf2normalized", "sdf2table", "mvn-stub", "jmh-stub")
PROGRAMS = ("editor", "spoofax", "benchmark")


def program_source(name: str) -> str:
    return resources.files(__package__).joinpath("programs", f"{name}.pie").read_text(encoding="utf-8")


def _stub_source(name: str) -> str:
    return resources.files(__package__).joinpath("stubs", f"{name}.py").read_text(encoding="utf-8")


def install_stubs(directory: str | None = None) -> str:
    """Write the stub tools as executables into ``directory`` and return it.

    The default directory is derived from the stub sources and the running
    interpreter, so repeated installs reuse the same files.
    """
    sources = {name: f"#!{sys.executable}\n" + _stub_source(name) for name in STUBS}
    if directory is None:
        h = hashlib.sha256("".join(sources[n] for n in STUBS).encode()).hexdigest()[:12]
        directory = os.path.join(tempfile.gettempdir(), f"pie-stubs-{h}")
    os.makedirs(directory, exist_ok=True)
    for name, text in sources.items():
        target = os.path.join(directory, name)
        try:
            with open(target, encoding="utf-8") as fh:
                current = fh.read()
        except OSError:
            current = None
        if current != text:
            tmp = f"{target}.{os.getpid()}.tmp"
            with open(tmp, "w", encoding="utf-8") as fh:
                fh.write(text)
            os.replace(tmp, target)
        mode = os.stat(target).st_mode
        os.chmod(target, mode | stat.S_IXUSR | stat.S_IXGRP | stat.S_IXOTH)
    return directory


def pie_plugin(fr) -> None:
    """CLI plugin hook: stub tools on the exec search path plus foreign bindings."""
    fr.search_path.insert(0, install_stubs())
    register_foreign_stubs(fr)


__all__ = ["PROGRAMS", "STUBS", "install_stubs", "pie_plugin", "program_source", "register_foreign_stubs"]

"""Incremental build pipelines with dynamic dependencies."""

from pie.errors import PieError
from pie.runtime import ExecContext, Pie, Session, TaskRegistry, export_dep_graph, new_session
from pie.stampers import Filter, FilterKind, OutputStamper, PathStamper
from pie.store import Store, TaskKey, open_store
from pie.values import Transient

__all__ = [
    "ExecContext", "Filter", "FilterKind", "OutputStamper", "PathStamper", "Pie", "PieError",
    "Session", "Store", "TaskKey", "TaskRegistry", "Transient", "export_dep_graph",
    "new_session", "open_store",
]

"""Shared strategies and filesystem helpers for the test suite."""

from __future__ import annotations

import os

from hypothesis import strategies as st

from pie.values import (
    FALSE,
    INT_MAX,
    INT_MIN,
    NULL,
    TRUE,
    UNIT,
    IntV,
    ListV,
    PathV,
    StrV,
    TupleV,
)


text = st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=12)
path_text = st.lists(st.sampled_from(["a", "b", "src", "..", ".", "x.sdf", "lib"]), min_size=1, max_size=5).map(
    lambda segs: "/" + "/".join(segs)
)

scalars = st.one_of(
    st.just(UNIT),
    st.just(NULL),
    st.sampled_from([TRUE, FALSE]),
    st.integers(INT_MIN, INT_MAX).map(IntV),
    text.map(StrV),
    path_text.map(PathV),
)


def _extend(children):
    # lists are homogeneous, so build them from one scalar kind at a time
    homogeneous = st.sampled_from([
        st.integers(-5, 5).map(IntV),
        text.map(StrV),
        path_text.map(PathV),
    ]).flatmap(lambda s: st.lists(s, max_size=4)).map(lambda xs: ListV(tuple(xs)))
    tuples = st.lists(children, min_size=2, max_size=3).map(lambda xs: TupleV(tuple(xs)))
    return st.one_of(homogeneous, tuples)


values = st.recursive(scalars, _extend, max_leaves=8)


def bump_mtime(path: str) -> None:
    """Advance a file's mtime without touching its content."""
    st_ = os.stat(path)
    os.utime(path, ns=(st_.st_atime_ns, st_.st_mtime_ns + 1_000_000_000))


def write(path: str, text: str) -> str:
    """Write and make sure the mtime differs from any earlier write."""
    before = os.stat(path).st_mtime_ns if os.path.exists(path) else None
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    if before is not None and os.stat(path).st_mtime_ns == before:
        bump_mtime(path)
    return path
